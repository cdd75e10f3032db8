//! Cycle-by-cycle simulation of the executive harvesting observations.
//!
//! Every cycle the world is sampled first: the true state at each candidate
//! time and at the boundary, one observation-noise draw per observer, and the
//! airtimes. Only then does the policy choose, so policies run on one seed see
//! identical worlds. Process noise, observation noise, the initial state and
//! the channel each draw from their own RNG stream.

mod channel;
mod truth;

pub use channel::{sample_airtimes, AirtimeSource, AirtimeTrace, ChannelConfig, CycleAirtimes, UniformRange};
pub use truth::{gaussian_factor, sample_gaussian, step_true_state};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OspError, Result};
use crate::kalman::{predict_cov, propagate_estimate, update_estimate, InputSchedule};
use crate::linalg::{CovMatrix, Vector};
use crate::model::SystemModel;
use crate::schedule::{
    bnb_search, evaluate_sequence, greedy_search, Candidate, CycleContext, ObsSequence,
    ScheduleEvaluation,
};
use crate::timing::cycle_candidates;

const STREAM_PROCESS: u64 = 1;
const STREAM_OBSERVATION: u64 = 2;
const STREAM_INITIAL: u64 = 3;

/// How the executive picks observations each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// MSE-optimal schedulable sequence.
    Bnb,
    /// First-come-first-served.
    Greedy,
    /// Every candidate, ignoring the deadline.
    All,
    /// Nothing; pure prediction.
    None,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Bnb, Policy::Greedy, Policy::All, Policy::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Bnb => "bnb",
            Policy::Greedy => "greedy",
            Policy::All => "all",
            Policy::None => "none",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = OspError;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| OspError::Config(format!("unknown policy {s:?} (expected bnb, greedy, all or none)")))
    }
}

/// Everything about a run besides the plant and the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub policy: Policy,
    pub cycles: u64,
    /// `P∅` at time 0; the executive's initial estimate is the zero vector.
    pub prior: CovMatrix,
    /// True state at time 0. Drawn from `N(0, prior)` when absent.
    pub initial_state: Option<Vector>,
    pub inputs: InputSchedule,
}

/// What happened in one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleLog {
    pub cycle: u64,
    pub policy: Policy,
    /// Candidates offered to the policy, in harvest order.
    pub candidates: Vec<Candidate>,
    pub action_airtimes: Vec<f64>,
    pub seq: ObsSequence,
    /// Observer ids of `seq`.
    pub observers: Vec<usize>,
    pub end_of_harvest: f64,
    pub budget: f64,
    pub mse_pred: f64,
    /// `‖x(kT) − x̂(kT)‖²`.
    pub sq_err: f64,
    pub nodes_visited: u64,
    pub forced_empty: bool,
    /// Anchor time and covariance the cycle started from.
    pub prior_t0: f64,
    pub prior_cov: CovMatrix,
    pub x_true: Vector,
    pub x_hat: Vector,
}

/// Runs `spec.cycles` decision cycles.
pub fn run_simulation(model: &SystemModel, channel: &ChannelConfig, spec: &RunSpec) -> Result<Vec<CycleLog>> {
    if spec.cycles < 1 {
        return Err(OspError::Domain("at least one cycle is required".into()));
    }
    let dim = model.state_dim();
    if spec.prior.dim() != dim {
        return Err(OspError::Dimension(format!(
            "prior covariance is {0}x{0}, state dimension is {dim}",
            spec.prior.dim()
        )));
    }
    channel.validate(Some(model.num_observers()))?;

    let stream = |id| {
        let mut rng = ChaCha8Rng::seed_from_u64(channel.seed);
        rng.set_stream(id);
        rng
    };
    let mut process_rng = stream(STREAM_PROCESS);
    let mut obs_rng = stream(STREAM_OBSERVATION);

    let mut x_true = match &spec.initial_state {
        Some(x) if x.len() != dim => {
            return Err(OspError::Dimension(format!(
                "initial state has {} entries, state dimension is {dim}",
                x.len()
            )))
        }
        Some(x) => x.clone(),
        None => {
            let factor = gaussian_factor(&spec.prior)?;
            sample_gaussian(factor.as_ref(), dim, &mut stream(STREAM_INITIAL))
        }
    };
    let mut t_true = 0.0;
    let mut x_hat = Vector::zeros(dim);
    let mut anchor_t = 0.0;
    let mut anchor_p = spec.prior.clone();
    let mut last_harvest: Vec<Option<f64>> = vec![None; model.num_observers()];
    let mut carried: HashMap<(usize, u64), f64> = HashMap::new();
    let period = model.period();
    let mut logs = Vec::with_capacity(spec.cycles as usize);

    for k in 1..=spec.cycles {
        let start = (k - 1) as f64 * period;
        let end = start + period;

        // The world, independent of the policy.
        let raw = cycle_candidates(model, k)?;
        let noise_draws: Vec<f64> = (0..model.num_observers())
            .map(|_| rand::Rng::sample::<f64, _>(&mut obs_rng, rand_distr::StandardNormal))
            .collect();
        let mut values = HashMap::with_capacity(raw.len());
        for c in &raw {
            let at = c.timestamp.max(t_true);
            x_true = step_true_state(model, &x_true, &spec.inputs, t_true, at, &mut process_rng)?;
            t_true = at;
            let key = (c.observer, c.timestamp.to_bits());
            let y = match carried.get(&key) {
                Some(&y) => y,
                None => {
                    let row = model.obs_row(c.observer)?;
                    row.dot(&x_true) + model.obs_noise(c.observer)?.sqrt() * noise_draws[c.observer]
                }
            };
            values.insert(key, y);
        }
        let at = end.max(t_true);
        x_true = step_true_state(model, &x_true, &spec.inputs, t_true, at, &mut process_rng)?;
        t_true = at;

        let raw_ids: Vec<usize> = raw.iter().map(|c| c.observer).collect();
        let airtimes = sample_airtimes(channel, k, &raw_ids)?;
        // A slow observer's sample can straddle two cycles; never fuse it twice.
        let cands = raw
            .iter()
            .zip(&airtimes.observations)
            .filter(|(c, _)| last_harvest[c.observer].is_none_or(|t| c.timestamp > t))
            .map(|(c, &airtime)| Candidate {
                observer: c.observer,
                timestamp: c.timestamp,
                airtime,
            })
            .collect();
        let ctx = CycleContext::new(cands, airtimes.actions, period, start, anchor_t, anchor_p.clone())?;
        let eval = choose(spec.policy, &ctx, model)?;

        // The executive fuses what it harvested.
        let (prior_t0, prior_cov) = (anchor_t, anchor_p.clone());
        for &p in eval.seq.positions() {
            let cand = ctx.candidates()[p];
            x_hat = propagate_estimate(model, &x_hat, &spec.inputs, anchor_t, cand.timestamp)?;
            let predicted = predict_cov(model, &anchor_p, anchor_t, cand.timestamp)?;
            let y = values[&(cand.observer, cand.timestamp.to_bits())];
            let (x_new, p_new, _) = update_estimate(
                &x_hat,
                &predicted,
                y,
                &model.obs_row(cand.observer)?,
                model.obs_noise(cand.observer)?,
            )?;
            x_hat = x_new;
            anchor_p = p_new;
            anchor_t = cand.timestamp;
            last_harvest[cand.observer] = Some(cand.timestamp);
        }
        let x_hat_end = propagate_estimate(model, &x_hat, &spec.inputs, anchor_t, end)?;
        let sq_err = (&x_true - &x_hat_end).norm_squared();
        log::trace!("cycle {k}: seq {} mse {:.6e} sq_err {sq_err:.6e}", eval.seq, eval.mse);

        logs.push(CycleLog {
            cycle: k,
            policy: spec.policy,
            candidates: ctx.candidates().to_vec(),
            action_airtimes: ctx.action_airtimes().to_vec(),
            seq: eval.seq,
            observers: eval.observers,
            end_of_harvest: eval.end_of_harvest,
            budget: ctx.budget(),
            mse_pred: eval.mse,
            sq_err,
            nodes_visited: eval.nodes_visited,
            forced_empty: eval.forced_empty,
            prior_t0,
            prior_cov,
            x_true: x_true.clone(),
            x_hat: x_hat_end,
        });
        carried = values;
    }
    Ok(logs)
}

impl CycleLog {
    /// The instance the policy solved this cycle.
    pub fn context(&self, period: f64) -> Result<CycleContext> {
        CycleContext::new(
            self.candidates.clone(),
            self.action_airtimes.clone(),
            period,
            (self.cycle - 1) as f64 * period,
            self.prior_t0,
            self.prior_cov.clone(),
        )
    }
}

fn choose(policy: Policy, ctx: &CycleContext, model: &SystemModel) -> Result<ScheduleEvaluation> {
    let mut eval = match policy {
        Policy::Bnb => return bnb_search(ctx, model),
        Policy::Greedy => return greedy_search(ctx, model),
        Policy::All => evaluate_sequence(ctx, model, &ObsSequence::new((0..ctx.len()).collect())?)?,
        Policy::None => evaluate_sequence(ctx, model, &ObsSequence::empty())?,
    };
    eval.nodes_visited = 0;
    Ok(eval)
}

/// Fraction of cycles in which each observer was harvested.
pub fn selection_stats(logs: &[CycleLog], num_observers: usize) -> Result<Vec<f64>> {
    if logs.is_empty() {
        return Err(OspError::Domain("selection statistics need at least one cycle".into()));
    }
    let mut counts = vec![0usize; num_observers];
    for log in logs {
        for &o in &log.observers {
            let slot = counts.get_mut(o).ok_or_else(|| {
                OspError::Domain(format!("observer {o} out of range ({num_observers} observers)"))
            })?;
            *slot += 1;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / logs.len() as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::sequence_mse;
    use crate::linalg::Matrix;
    use crate::presets;
    use crate::schedule::is_schedulable;

    fn reference_channel(n: usize, seed: u64) -> ChannelConfig {
        ChannelConfig::uniform(
            vec![UniformRange::new(5e-4, 2.5e-3).unwrap(); n],
            vec![UniformRange::new(2e-3, 3e-3).unwrap()],
            seed,
        )
        .unwrap()
    }

    fn spec(policy: Policy, cycles: u64) -> RunSpec {
        RunSpec {
            policy,
            cycles,
            prior: CovMatrix::identity(3),
            initial_state: None,
            inputs: InputSchedule::Zero,
        }
    }

    fn reference() -> SystemModel {
        presets::reference_model(presets::reference_c2(), "010000", vec![0.01, 0.01, 0.004, 0.007, 0.02, 0.03]).unwrap()
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!("fcfs".parse::<Policy>().is_err());
    }

    #[test]
    fn single_cycle_without_harvest_is_pure_prediction() {
        let m = reference();
        let mut s = spec(Policy::None, 1);
        s.initial_state = Some(Vector::from_vec(vec![1.0, -2.0, 0.5]));
        let logs = run_simulation(&m, &reference_channel(6, 3), &s).unwrap();
        assert_eq!(logs.len(), 1);
        assert!(logs[0].seq.is_empty());
        assert_eq!(logs[0].x_hat, Vector::zeros(3));
        let want = predict_cov(&m, &CovMatrix::identity(3), 0.0, 0.01).unwrap().trace();
        assert!((logs[0].mse_pred - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn bnb_run_is_schedulable_and_consistent() {
        let m = reference();
        let logs = run_simulation(&m, &reference_channel(6, 21), &spec(Policy::Bnb, 100)).unwrap();
        assert_eq!(logs.len(), 100);
        for log in &logs {
            let ctx = log.context(m.period()).unwrap();
            assert_eq!(ctx.budget(), log.budget);
            let d = crate::schedule::end_of_harvest(&log.seq, &ctx).unwrap();
            assert_eq!(d, log.end_of_harvest);
            assert!(log.forced_empty || d < log.budget);
            let times: Vec<_> = log.seq.positions().iter().map(|&p| log.candidates[p].time()).collect();
            let (mse, _) = sequence_mse(&m, &log.prior_cov, log.prior_t0, &times, ctx.boundary()).unwrap();
            assert!((mse - log.mse_pred).abs() <= 1e-12 * mse, "cycle {}", log.cycle);
        }
    }

    #[test]
    fn bnb_dominates_greedy_every_cycle() {
        let m = reference();
        for seed in 0..3 {
            let ch = reference_channel(6, seed);
            let b = run_simulation(&m, &ch, &spec(Policy::Bnb, 60)).unwrap();
            let g = run_simulation(&m, &ch, &spec(Policy::Greedy, 60)).unwrap();
            // Dominance is per cycle from a shared anchor, so check the first
            // cycle exactly and every cycle against the greedy choice re-solved
            // from the bnb anchor.
            assert!(b[0].mse_pred <= g[0].mse_pred * (1.0 + 1e-12));
            for log in &b {
                let ctx = log.context(m.period()).unwrap();
                let greedy = greedy_search(&ctx, &m).unwrap();
                assert!(log.mse_pred <= greedy.mse * (1.0 + 1e-12));
                assert!(is_schedulable(&log.seq, &ctx).unwrap() || log.forced_empty);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_every_field() {
        let m = reference();
        let ch = reference_channel(6, 77);
        let a = run_simulation(&m, &ch, &spec(Policy::Bnb, 30)).unwrap();
        let b = run_simulation(&m, &ch, &spec(Policy::Bnb, 30)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn policies_share_the_world() {
        let m = reference();
        let ch = reference_channel(6, 5);
        let a = run_simulation(&m, &ch, &spec(Policy::All, 20)).unwrap();
        let n = run_simulation(&m, &ch, &spec(Policy::None, 20)).unwrap();
        for (x, y) in a.iter().zip(&n) {
            assert_eq!(x.x_true, y.x_true);
        }
    }

    #[test]
    fn slow_sample_is_not_fused_twice() {
        // Period 0.02 puts a sample exactly on every other boundary, where it
        // is a candidate of both adjacent cycles.
        let c = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let m = SystemModel::new(
            presets::reference_a(),
            presets::reference_b(),
            c,
            presets::reference_q(),
            Matrix::from_element(1, 1, 1e-2),
            0.01,
            vec![0.02],
        )
        .unwrap();
        let ch = ChannelConfig::uniform(vec![UniformRange::fixed(1e-3).unwrap()], vec![], 1).unwrap();
        let logs = run_simulation(&m, &ch, &spec(Policy::All, 6)).unwrap();
        let harvested: Vec<f64> = logs
            .iter()
            .flat_map(|l| l.seq.positions().iter().map(|&p| l.candidates[p].timestamp).collect::<Vec<_>>())
            .collect();
        for w in harvested.windows(2) {
            assert!(w[1] > w[0], "{harvested:?}");
        }
    }

    #[test]
    fn selection_frequencies() {
        let m = presets::reference_model(presets::reference_c1(), "000000", vec![0.01; 6]).unwrap();
        let ch = reference_channel(6, 2);
        let all = run_simulation(&m, &ch, &spec(Policy::All, 10)).unwrap();
        assert_eq!(selection_stats(&all, 6).unwrap(), vec![1.0; 6]);
        let none = run_simulation(&m, &ch, &spec(Policy::None, 10)).unwrap();
        assert_eq!(selection_stats(&none, 6).unwrap(), vec![0.0; 6]);
        assert!(selection_stats(&[], 6).is_err());
    }

    #[test]
    fn long_run_is_calibrated() {
        let m = presets::reference_model(presets::reference_c2(), "000000", vec![0.01; 6]).unwrap();
        let logs = run_simulation(&m, &reference_channel(6, 8), &spec(Policy::All, 600)).unwrap();
        let pred = logs.iter().map(|l| l.mse_pred).sum::<f64>() / logs.len() as f64;
        let real = logs.iter().map(|l| l.sq_err).sum::<f64>() / logs.len() as f64;
        let ratio = real / pred;
        assert!((0.5..=2.0).contains(&ratio), "ratio = {ratio}");
    }
}
