//! Observer selection within one decision cycle.
//!
//! Candidates are ordered by timestamp and harvested first-come-first-served
//! without preemption. A sequence's end-of-harvest time `d` follows
//! `d ← max(o_j + O_j, d + O_j)` and the sequence is schedulable iff `d < B`,
//! where `B = T − ΣA_m` leaves room for dispatching every action.

mod search;

pub use search::{bnb_search, evaluate_sequence, exhaustive_oracle, greedy_search, EXHAUSTIVE_MAX_L};

use std::fmt;

use serde::Serialize;

use crate::error::{OspError, Result};
use crate::linalg::CovMatrix;
use crate::timing::CandidateTime;

/// One harvestable observation: when it was sampled and how long it takes to send.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub observer: usize,
    pub timestamp: f64,
    pub airtime: f64,
}

impl Candidate {
    pub fn time(&self) -> CandidateTime {
        CandidateTime {
            observer: self.observer,
            timestamp: self.timestamp,
        }
    }
}

/// Ascending timestamp, ties broken by ascending observer id.
pub fn order_observations(mut raw: Vec<Candidate>) -> Vec<Candidate> {
    raw.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then(a.observer.cmp(&b.observer))
    });
    raw
}

/// `T − ΣA_m`; may be zero or negative.
pub fn harvesting_budget(period: f64, action_airtimes: &[f64]) -> f64 {
    period - action_airtimes.iter().sum::<f64>()
}

/// Everything needed to solve one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleContext {
    candidates: Vec<Candidate>,
    action_airtimes: Vec<f64>,
    period: f64,
    cycle_start: f64,
    t0: f64,
    prior: CovMatrix,
    budget: f64,
}

impl CycleContext {
    /// `raw` may arrive in any order; it is sorted here.
    pub fn new(
        raw: Vec<Candidate>,
        action_airtimes: Vec<f64>,
        period: f64,
        cycle_start: f64,
        t0: f64,
        prior: CovMatrix,
    ) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(OspError::Domain(format!("period must be positive, got {period}")));
        }
        if !cycle_start.is_finite() || !t0.is_finite() {
            return Err(OspError::Domain("cycle start and prior anchor must be finite".into()));
        }
        if let Some(a) = action_airtimes.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(OspError::Domain(format!(
                "action airtimes must be nonnegative, got {a}"
            )));
        }
        let candidates = order_observations(raw);
        let boundary = cycle_start + period;
        let mut seen = std::collections::BTreeSet::new();
        for c in &candidates {
            if !(c.airtime > 0.0 && c.airtime.is_finite()) {
                return Err(OspError::Domain(format!(
                    "observer {} airtime must be positive, got {}",
                    c.observer, c.airtime
                )));
            }
            if !c.timestamp.is_finite() || c.timestamp > boundary {
                return Err(OspError::Domain(format!(
                    "observer {} timestamp {} lies past the cycle boundary {boundary}",
                    c.observer, c.timestamp
                )));
            }
            if !seen.insert(c.observer) {
                return Err(OspError::Domain(format!(
                    "observer {} offers more than one observation",
                    c.observer
                )));
            }
        }
        if let Some(first) = candidates.first() {
            if first.timestamp < t0 {
                return Err(OspError::Ordering(format!(
                    "first candidate at {} precedes the prior anchor {t0}",
                    first.timestamp
                )));
            }
        }
        let budget = harvesting_budget(period, &action_airtimes);
        Ok(Self {
            candidates,
            action_airtimes,
            period,
            cycle_start,
            t0,
            prior,
            budget,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn action_airtimes(&self) -> &[f64] {
        &self.action_airtimes
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn cycle_start(&self) -> f64 {
        self.cycle_start
    }

    /// `kT`, where the MSE is evaluated.
    pub fn boundary(&self) -> f64 {
        self.cycle_start + self.period
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn prior(&self) -> &CovMatrix {
        &self.prior
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `o_ℓ`: sample time measured from the start of the cycle.
    pub fn offset(&self, position: usize) -> f64 {
        self.candidates[position].timestamp - self.cycle_start
    }

    pub fn airtime(&self, position: usize) -> f64 {
        self.candidates[position].airtime
    }

    fn check_positions(&self, seq: &ObsSequence) -> Result<()> {
        match seq.positions().last() {
            Some(&p) if p >= self.len() => Err(OspError::Domain(format!(
                "sequence index {} out of range for {} candidates",
                p + 1,
                self.len()
            ))),
            _ => Ok(()),
        }
    }

    pub(crate) fn times(&self, seq: &ObsSequence) -> Vec<CandidateTime> {
        seq.positions()
            .iter()
            .map(|&p| self.candidates[p].time())
            .collect()
    }
}

/// Strictly ascending 0-based candidate positions. Displays 1-based, `+`-joined.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ObsSequence(Vec<usize>);

impl ObsSequence {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(positions: Vec<usize>) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OspError::Ordering(format!(
                "sequence positions must strictly ascend: {positions:?}"
            )));
        }
        Ok(Self(positions))
    }

    /// From 1-based indices as written in the literature and on the CLI.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(OspError::Domain("sequence indices start at 1".into()));
        }
        Self::new(indices.iter().map(|i| i - 1).collect())
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn push(&mut self, p: usize) {
        debug_assert!(self.0.last().is_none_or(|&l| l < p));
        self.0.push(p);
    }

    pub(crate) fn pop(&mut self) {
        self.0.pop();
    }
}

impl fmt::Display for ObsSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{}", p + 1)?;
        }
        Ok(())
    }
}

/// One step of the end-of-harvest recursion.
#[inline]
pub(crate) fn extend_harvest(d: f64, offset: f64, airtime: f64) -> f64 {
    (offset + airtime).max(d + airtime)
}

/// Time at which the last observation of `seq` finishes transmitting (0 for ∅).
pub fn end_of_harvest(seq: &ObsSequence, ctx: &CycleContext) -> Result<f64> {
    ctx.check_positions(seq)?;
    Ok(seq
        .positions()
        .iter()
        .fold(0.0, |d, &p| extend_harvest(d, ctx.offset(p), ctx.airtime(p))))
}

/// `d < B`, strictly.
pub fn is_schedulable(seq: &ObsSequence, ctx: &CycleContext) -> Result<bool> {
    Ok(end_of_harvest(seq, ctx)? < ctx.budget())
}

/// Outcome of solving a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEvaluation {
    pub seq: ObsSequence,
    /// Observer ids in harvest order.
    pub observers: Vec<usize>,
    pub end_of_harvest: f64,
    pub mse: f64,
    pub running_cov: CovMatrix,
    pub nodes_visited: u64,
    /// Set when `B ≤ 0` left nothing schedulable, not even the empty sequence.
    pub forced_empty: bool,
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// `max(0, max_i (o_i + Σ_{j ≥ i} O_j))` over the positions in `seq`.
    pub fn suffix_sum_harvest(seq: &ObsSequence, ctx: &CycleContext) -> f64 {
        let p = seq.positions();
        (0..p.len())
            .map(|i| ctx.offset(p[i]) + p[i..].iter().map(|&j| ctx.airtime(j)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cand(observer: usize, timestamp: f64, airtime: f64) -> Candidate {
        Candidate {
            observer,
            timestamp,
            airtime,
        }
    }

    fn ctx(cands: Vec<Candidate>, actions: Vec<f64>) -> CycleContext {
        CycleContext::new(cands, actions, 0.01, 0.0, 0.0, CovMatrix::identity(1)).unwrap()
    }

    fn domino() -> CycleContext {
        ctx(
            vec![
                cand(0, 0.001, 0.002),
                cand(1, 0.002, 0.002),
                cand(2, 0.003, 0.002),
            ],
            vec![],
        )
    }

    #[test]
    fn ordering_keeps_sorted_input() {
        let sorted = vec![cand(0, 0.001, 1.0), cand(1, 0.002, 1.0)];
        assert_eq!(order_observations(sorted.clone()), sorted);
    }

    #[test]
    fn ordering_sorts_reversed_input() {
        let got = order_observations(vec![cand(2, 0.003, 1.0), cand(1, 0.002, 1.0), cand(0, 0.001, 1.0)]);
        let ids: Vec<_> = got.iter().map(|c| c.observer).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn ordering_breaks_ties_by_observer() {
        let got = order_observations(vec![cand(3, 0.002, 1.0), cand(1, 0.002, 1.0)]);
        assert_eq!(got[0].observer, 1);
        assert_eq!(got[1].observer, 3);
    }

    #[test]
    fn budget_examples() {
        assert_eq!(harvesting_budget(0.01, &[]), 0.01);
        assert_relative_eq!(harvesting_budget(0.01, &[0.002, 0.003]), 0.005, max_relative = 1e-12);
        assert_relative_eq!(harvesting_budget(0.01, &[0.02]), -0.01, max_relative = 1e-12);
    }

    #[test]
    fn harvest_of_empty_and_single() {
        let c = domino();
        assert_eq!(end_of_harvest(&ObsSequence::empty(), &c).unwrap(), 0.0);
        let single = ObsSequence::from_one_based(&[1]).unwrap();
        assert_relative_eq!(end_of_harvest(&single, &c).unwrap(), 0.003, max_relative = 1e-12);
    }

    #[test]
    fn harvest_domino() {
        let c = domino();
        let all = ObsSequence::from_one_based(&[1, 2, 3]).unwrap();
        let d = end_of_harvest(&all, &c).unwrap();
        assert_relative_eq!(d, 0.007, max_relative = 1e-12);
        assert_relative_eq!(d, oracle::suffix_sum_harvest(&all, &c), max_relative = 1e-15);
    }

    #[test]
    fn harvest_index_out_of_range() {
        let c = domino();
        let bad = ObsSequence::new(vec![0, 3]).unwrap();
        assert!(matches!(end_of_harvest(&bad, &c), Err(OspError::Domain(_))));
    }

    #[test]
    fn schedulability_is_strict() {
        let empty = ObsSequence::empty();
        let c = ctx(vec![], vec![0.005]);
        assert!(is_schedulable(&empty, &c).unwrap());
        let c = ctx(vec![], vec![0.01]);
        assert_eq!(c.budget(), 0.0);
        assert!(!is_schedulable(&empty, &c).unwrap());

        let c = ctx(
            vec![
                cand(0, 0.001, 0.002),
                cand(1, 0.002, 0.002),
                cand(2, 0.003, 0.002),
            ],
            vec![0.0035],
        );
        let all = ObsSequence::from_one_based(&[1, 2, 3]).unwrap();
        assert!(!is_schedulable(&all, &c).unwrap());
    }

    #[test]
    fn sequence_must_ascend() {
        assert!(ObsSequence::new(vec![2, 1]).is_err());
        assert!(ObsSequence::new(vec![1, 1]).is_err());
        assert_eq!(ObsSequence::new(vec![0, 2, 3]).unwrap().to_string(), "1+3+4");
        assert_eq!(ObsSequence::empty().to_string(), "-");
    }

    #[test]
    fn context_validation() {
        let p = CovMatrix::identity(1);
        let dup = vec![cand(0, 0.001, 0.001), cand(0, 0.002, 0.001)];
        assert!(CycleContext::new(dup, vec![], 0.01, 0.0, 0.0, p.clone()).is_err());
        let zero_air = vec![cand(0, 0.001, 0.0)];
        assert!(CycleContext::new(zero_air, vec![], 0.01, 0.0, 0.0, p.clone()).is_err());
        let before_anchor = vec![cand(0, 0.001, 0.001)];
        assert!(matches!(
            CycleContext::new(before_anchor, vec![], 0.01, 0.0, 0.002, p.clone()),
            Err(OspError::Ordering(_))
        ));
        assert!(CycleContext::new(vec![], vec![-0.1], 0.01, 0.0, 0.0, p).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<bool>)> {
        (1usize..=10).prop_flat_map(|l| {
            (
                proptest::collection::vec((0.0f64..0.01, 1e-5f64..0.004), l),
                proptest::collection::vec(any::<bool>(), l),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn recursion_matches_closed_form_and_grows((raw, mask) in instance()) {
            let cands = raw
                .iter()
                .enumerate()
                .map(|(i, &(t, o))| cand(i, t, o))
                .collect();
            let c = ctx(cands, vec![]);
            let positions: Vec<usize> = (0..c.len()).filter(|&i| mask[i]).collect();
            let seq = ObsSequence::new(positions.clone()).unwrap();
            let d = end_of_harvest(&seq, &c).unwrap();
            let closed = oracle::suffix_sum_harvest(&seq, &c);
            prop_assert!((d - closed).abs() <= 1e-15 * closed.max(f64::MIN_POSITIVE));
            if let Some(&last) = positions.last() {
                let prefix = ObsSequence::new(positions[..positions.len() - 1].to_vec()).unwrap();
                let dp = end_of_harvest(&prefix, &c).unwrap();
                prop_assert!(d >= dp + c.airtime(last) * (1.0 - 1e-12));
                prop_assert!(d > dp);
            }
        }
    }
}
