//! Representative observation timestamps per decision cycle.
//!
//! Cycle `k ≥ 1` covers `[(k−1)T, kT]`. An observer with period `T_n` offers
//! at most one observation per cycle: the first sample in that window.

use crate::error::{OspError, Result};
use crate::model::SystemModel;

/// Relative slack on the ceil/floor boundary tests, as a multiple of `T`.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// First sample time of an observer with period `obs_period` inside cycle `k`,
/// or `None` when a slow observer skips the cycle entirely.
pub fn first_obs_timestamp(period: f64, obs_period: f64, k: u64) -> Result<Option<f64>> {
    if k < 1 {
        return Err(OspError::Domain("cycle index must be at least 1".into()));
    }
    if !(period > 0.0 && period.is_finite() && obs_period > 0.0 && obs_period.is_finite()) {
        return Err(OspError::Domain(format!(
            "periods must be positive and finite (T = {period}, T_n = {obs_period})"
        )));
    }
    let eps = BOUNDARY_EPS * period;
    let start = (k - 1) as f64 * period;
    let end = k as f64 * period;

    if (obs_period - period).abs() <= eps {
        return Ok(Some(start));
    }
    if obs_period < period {
        // `+ 0.0` folds a negative zero from ceil(-eps) into +0.
        let n = ((start - eps) / obs_period).ceil() + 0.0;
        return Ok(Some(n * obs_period));
    }
    let n = ((end + eps) / obs_period).floor();
    let t = n * obs_period;
    if end - t <= period + eps {
        Ok(Some(t))
    } else {
        Ok(None)
    }
}

/// An observation the executive may harvest in a given cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateTime {
    pub observer: usize,
    pub timestamp: f64,
}

/// One entry per observer that samples during cycle `k`, ordered by timestamp
/// then observer. Timestamps are clamped into the cycle window.
pub fn cycle_candidates(model: &SystemModel, k: u64) -> Result<Vec<CandidateTime>> {
    let start = (k.max(1) - 1) as f64 * model.period();
    let end = start + model.period();
    let mut out = Vec::with_capacity(model.num_observers());
    for (observer, &tn) in model.observer_periods().iter().enumerate() {
        if let Some(t) = first_obs_timestamp(model.period(), tn, k)? {
            out.push(CandidateTime {
                observer,
                timestamp: t.clamp(start, end),
            });
        }
    }
    out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.observer.cmp(&b.observer)));
    Ok(out)
}

#[cfg(test)]
pub(crate) mod oracle {
    /// First point of the grid `{n·T_n}` inside the closed cycle window.
    pub fn grid_first(period: f64, obs_period: f64, k: u64) -> Option<f64> {
        let eps = 1e-9 * period;
        let lo = (k - 1) as f64 * period - eps;
        let hi = k as f64 * period + eps;
        let mut n = 0u64;
        loop {
            let t = n as f64 * obs_period;
            if t > hi {
                return None;
            }
            if t >= lo {
                return Some(t);
            }
            n += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model_with_periods(periods: Vec<f64>) -> SystemModel {
        let n = periods.len();
        SystemModel::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::zeros(1, 1),
            Matrix::from_element(n, 1, 1.0),
            Matrix::identity(1, 1),
            Matrix::identity(n, n),
            0.01,
            periods,
        )
        .unwrap()
    }

    #[test]
    fn equal_periods_land_on_cycle_start() {
        assert_relative_eq!(
            first_obs_timestamp(0.01, 0.01, 3).unwrap().unwrap(),
            0.02,
            max_relative = 1e-12
        );
    }

    #[test]
    fn fast_observer() {
        let t = first_obs_timestamp(0.01, 0.003, 2).unwrap().unwrap();
        assert_relative_eq!(t, 0.012, max_relative = 1e-12);
        assert_eq!(first_obs_timestamp(0.01, 0.003, 1).unwrap(), Some(0.0));
        let t3 = first_obs_timestamp(0.01, 0.003, 3).unwrap().unwrap();
        assert_relative_eq!(t3, 0.021, max_relative = 1e-12);
    }

    #[test]
    fn slow_observer_skips_cycles() {
        assert_eq!(first_obs_timestamp(0.01, 0.025, 2).unwrap(), None);
        let t = first_obs_timestamp(0.01, 0.025, 3).unwrap().unwrap();
        assert_relative_eq!(t, 0.025, max_relative = 1e-12);
    }

    #[test]
    fn boundary_multiples_survive_rounding() {
        // 0.03 / 0.002 is 14.999999999999998 in floating point.
        let t = first_obs_timestamp(0.01, 0.002, 4).unwrap().unwrap();
        assert_relative_eq!(t, 0.03, max_relative = 1e-12);
    }

    #[test]
    fn cycle_zero_is_rejected() {
        assert!(matches!(
            first_obs_timestamp(0.01, 0.01, 0),
            Err(OspError::Domain(_))
        ));
    }

    #[test]
    fn candidates_single_observer() {
        let m = model_with_periods(vec![0.01]);
        let c = cycle_candidates(&m, 4).unwrap();
        assert_eq!(c.len(), 1);
        assert_relative_eq!(c[0].timestamp, 0.03, max_relative = 1e-12);
    }

    #[test]
    fn candidates_omit_idle_observers() {
        let m = model_with_periods(vec![0.003, 0.025]);
        let c = cycle_candidates(&m, 2).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].observer, 0);
        assert_relative_eq!(c[0].timestamp, 0.012, max_relative = 1e-12);
    }

    #[test]
    fn candidates_without_observers() {
        let m = SystemModel::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::zeros(1, 1),
            Matrix::zeros(0, 1),
            Matrix::identity(1, 1),
            Matrix::zeros(0, 0),
            0.01,
            vec![],
        )
        .unwrap();
        assert!(cycle_candidates(&m, 1).unwrap().is_empty());
    }

    #[test]
    fn worked_examples_match_grid() {
        for (tn, k) in [(0.01, 3), (0.003, 2), (0.025, 2), (0.025, 3)] {
            let got = first_obs_timestamp(0.01, tn, k).unwrap();
            let want = oracle::grid_first(0.01, tn, k);
            match (got, want) {
                (Some(a), Some(b)) => assert_relative_eq!(a, b, max_relative = 1e-12),
                (None, None) => {}
                other => panic!("mismatch for T_n={tn}, k={k}: {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn matches_grid_enumeration(
            period in 1e-3f64..1.0,
            ratio in 0.05f64..6.0,
            k in 1u64..200,
        ) {
            let obs_period = period * ratio;
            let got = first_obs_timestamp(period, obs_period, k).unwrap();
            let want = oracle::grid_first(period, obs_period, k);
            match (got, want) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * period),
                (None, None) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }
    }
}
