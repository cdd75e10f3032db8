//! Per-cycle airtimes. Channels are block fading with coherence equal to the
//! decision period, so each link gets one draw per cycle.

use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OspError, Result};

/// Keeps channel draws on a different key from the noise streams.
const CHANNEL_SALT: u64 = 0x6368_616e_6e65_6c00;

/// Closed interval `[lo, hi]` with `0 < lo ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let r = Self { lo, hi };
        r.validate("airtime range")?;
        Ok(r)
    }

    pub fn fixed(value: f64) -> Result<Self> {
        Self::new(value, value)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo > 0.0 && self.lo <= self.hi && self.hi.is_finite()) {
            return Err(OspError::Config(format!(
                "{what} needs 0 < lo <= hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn distribution(&self) -> Result<Uniform<f64>> {
        Uniform::new_inclusive(self.lo, self.hi)
            .map_err(|e| OspError::Config(format!("airtime range [{}, {}]: {e}", self.lo, self.hi)))
    }
}

/// Recorded airtimes, one row per cycle: one airtime per observer that samples
/// in the cycle, in timestamp order, followed by the agents' airtimes.
#[derive(Debug, Clone, PartialEq)]
pub struct AirtimeTrace {
    rows: Vec<Vec<f64>>,
    agents: usize,
}

impl AirtimeTrace {
    pub fn parse(text: &str, agents: usize) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    let v: f64 = f.trim().parse().map_err(|_| {
                        OspError::Config(format!("trace line {}: cannot parse {f:?}", lineno + 1))
                    })?;
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(OspError::Config(format!(
                            "trace line {}: airtime {v} must be nonnegative",
                            lineno + 1
                        )));
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() < agents {
                return Err(OspError::Config(format!(
                    "trace line {}: {} fields, need at least {agents} agent airtimes",
                    lineno + 1,
                    row.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { rows, agents })
    }

    pub fn load(path: &Path, agents: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OspError::Config(format!("cannot read trace {}: {e}", path.display())))?;
        Self::parse(&text, agents)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn agents(&self) -> usize {
        self.agents
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AirtimeSource {
    Uniform {
        observers: Vec<UniformRange>,
        agents: Vec<UniformRange>,
    },
    Trace(AirtimeTrace),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub source: AirtimeSource,
    pub seed: u64,
}

/// Airtimes for one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleAirtimes {
    /// Indexed like the `candidate_observers` passed in.
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
}

impl ChannelConfig {
    pub fn uniform(observers: Vec<UniformRange>, agents: Vec<UniformRange>, seed: u64) -> Result<Self> {
        let cfg = Self {
            source: AirtimeSource::Uniform { observers, agents },
            seed,
        };
        cfg.validate(None)?;
        Ok(cfg)
    }

    /// Checks ranges, and when `observers` is given, that the per-observer list fits.
    pub fn validate(&self, observers: Option<usize>) -> Result<()> {
        if let AirtimeSource::Uniform {
            observers: obs,
            agents,
        } = &self.source
        {
            for (i, r) in obs.iter().enumerate() {
                r.validate(&format!("observer {i} airtime"))?;
            }
            for (i, r) in agents.iter().enumerate() {
                r.validate(&format!("agent {i} airtime"))?;
            }
            if let Some(n) = observers {
                if obs.len() != n {
                    return Err(OspError::Config(format!(
                        "channel lists {} observer airtime ranges, model has {n} observers",
                        obs.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of agents whose actions compete for the cycle.
    pub fn num_agents(&self) -> usize {
        match &self.source {
            AirtimeSource::Uniform { agents, .. } => agents.len(),
            AirtimeSource::Trace(t) => t.agents(),
        }
    }
}

/// One independent draw per observer and per agent for cycle `k`, returned
/// for the listed candidates only. Deterministic in `(seed, k)`.
pub fn sample_airtimes(cfg: &ChannelConfig, k: u64, candidate_observers: &[usize]) -> Result<CycleAirtimes> {
    match &cfg.source {
        AirtimeSource::Uniform { observers, agents } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ CHANNEL_SALT);
            rng.set_stream(k);
            let obs_draws = observers
                .iter()
                .map(|r| Ok(r.distribution()?.sample(&mut rng)))
                .collect::<Result<Vec<f64>>>()?;
            let actions = agents
                .iter()
                .map(|r| Ok(r.distribution()?.sample(&mut rng)))
                .collect::<Result<Vec<f64>>>()?;
            let observations = candidate_observers
                .iter()
                .map(|&o| {
                    obs_draws.get(o).copied().ok_or_else(|| {
                        OspError::Config(format!("no airtime range for observer {o}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(CycleAirtimes {
                observations,
                actions,
            })
        }
        AirtimeSource::Trace(trace) => {
            let row = usize::try_from(k)
                .ok()
                .and_then(|k| k.checked_sub(1))
                .and_then(|i| trace.rows.get(i))
                .ok_or_else(|| {
                    OspError::Config(format!(
                        "airtime trace has {} cycles, cycle {k} requested",
                        trace.len()
                    ))
                })?;
            let l = candidate_observers.len();
            if row.len() != l + trace.agents {
                return Err(OspError::Config(format!(
                    "trace cycle {k}: expected {l} observation and {} action airtimes, got {} fields",
                    trace.agents,
                    row.len()
                )));
            }
            if let Some(z) = row[..l].iter().find(|v| **v <= 0.0) {
                return Err(OspError::Config(format!(
                    "trace cycle {k}: observation airtime {z} must be positive"
                )));
            }
            Ok(CycleAirtimes {
                observations: row[..l].to_vec(),
                actions: row[l..].to_vec(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lo: f64, hi: f64, n: usize, seed: u64) -> ChannelConfig {
        let r = UniformRange::new(lo, hi).unwrap();
        ChannelConfig::uniform(vec![r; n], vec![r], seed).unwrap()
    }

    #[test]
    fn degenerate_range_is_constant() {
        let c = cfg(0.002, 0.002, 3, 1);
        let a = sample_airtimes(&c, 5, &[0, 1, 2]).unwrap();
        assert!(a.observations.iter().all(|&v| v == 0.002));
        assert_eq!(a.actions, vec![0.002]);
    }

    #[test]
    fn same_seed_and_cycle_reproduce() {
        let c = cfg(1e-4, 1e-3, 4, 42);
        assert_eq!(
            sample_airtimes(&c, 7, &[0, 2]).unwrap(),
            sample_airtimes(&c, 7, &[0, 2]).unwrap()
        );
        assert_ne!(
            sample_airtimes(&c, 7, &[0, 2]).unwrap(),
            sample_airtimes(&c, 8, &[0, 2]).unwrap()
        );
    }

    #[test]
    fn candidate_subset_keeps_per_observer_draws() {
        let c = cfg(1e-4, 1e-3, 4, 42);
        let all = sample_airtimes(&c, 3, &[0, 1, 2, 3]).unwrap();
        let some = sample_airtimes(&c, 3, &[1, 3]).unwrap();
        assert_eq!(some.observations, vec![all.observations[1], all.observations[3]]);
        assert_eq!(some.actions, all.actions);
    }

    #[test]
    fn uniform_draws_stay_in_range_and_center() {
        let (lo, hi) = (1e-4, 1e-3);
        let c = cfg(lo, hi, 1, 9);
        let draws: Vec<f64> = (1..=10_000)
            .map(|k| sample_airtimes(&c, k, &[0]).unwrap().observations[0])
            .collect();
        assert!(draws.iter().all(|&v| (lo..=hi).contains(&v)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd_of_mean = (hi - lo) / 12f64.sqrt() / (draws.len() as f64).sqrt();
        assert!((mean - (lo + hi) / 2.0).abs() < 3.0 * sd_of_mean);
    }

    #[test]
    fn invalid_ranges_are_config_errors() {
        assert!(matches!(UniformRange::new(0.0, 1.0), Err(OspError::Config(_))));
        assert!(matches!(UniformRange::new(2.0, 1.0), Err(OspError::Config(_))));
        let c = cfg(1e-4, 1e-3, 2, 0);
        assert!(c.validate(Some(3)).is_err());
    }

    #[test]
    fn trace_rows_split_into_observations_and_actions() {
        let trace = AirtimeTrace::parse("# header\n0.001,0.002,0.003\n\n0.004,0.005\n", 1).unwrap();
        let c = ChannelConfig {
            source: AirtimeSource::Trace(trace),
            seed: 0,
        };
        let a = sample_airtimes(&c, 1, &[0, 4]).unwrap();
        assert_eq!(a.observations, vec![0.001, 0.002]);
        assert_eq!(a.actions, vec![0.003]);
        let b = sample_airtimes(&c, 2, &[3]).unwrap();
        assert_eq!(b.observations, vec![0.004]);
        assert!(sample_airtimes(&c, 2, &[0, 1]).is_err());
        assert!(sample_airtimes(&c, 3, &[0]).is_err());
    }

    #[test]
    fn trace_rejects_garbage() {
        assert!(AirtimeTrace::parse("0.1,abc\n", 1).is_err());
        assert!(AirtimeTrace::parse("0.1,-1\n", 1).is_err());
        assert!(AirtimeTrace::parse("\n0.1\n", 2).is_err());
    }
}
