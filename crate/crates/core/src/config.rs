//! JSON experiment configuration.
//!
//! Matrices are nested arrays, row-major. Validation collects every violation
//! it finds and reports each with the line of the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{OspError, Result};
use crate::kalman::InputSchedule;
use crate::linalg::{CovMatrix, Matrix, Vector};
use crate::model::SystemModel;
use crate::presets;
use crate::schedule::{Candidate, CycleContext};
use crate::sim::{sample_airtimes, AirtimeSource, AirtimeTrace, ChannelConfig, Policy, RunSpec, UniformRange};
use crate::timing::cycle_candidates;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub channel: ChannelBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// A single cycle to solve with `schedule`; optional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    pub q: Rows,
    /// Full observation-noise covariance; must be diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Rows>,
    /// Shorthand for a diagonal `R`: `'0'` precise, `'1'` noisy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_bits: Option<String>,
    pub period: f64,
    pub observer_periods: Vec<f64>,
}

/// One range shared by all observers, or one per observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeSpec {
    Shared(UniformRange),
    PerObserver(Vec<UniformRange>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer_airtime: Option<RangeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_airtime: Option<Vec<UniformRange>>,
    /// Airtime trace file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Number of agents when a trace is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_policy")]
    pub policy: Policy,
    #[serde(default = "default_cycles")]
    pub cycles: u64,
    /// `P∅ = prior_scale · I`.
    #[serde(default = "default_prior_scale")]
    pub prior_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    /// Constant action vector held every cycle; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<f64>>,
}

fn default_policy() -> Policy {
    Policy::Bnb
}

fn default_cycles() -> u64 {
    100
}

fn default_prior_scale() -> f64 {
    1.0
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            policy: default_policy(),
            cycles: default_cycles(),
            prior_scale: default_prior_scale(),
            preset: None,
            initial_state: None,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub observer: usize,
    pub timestamp: f64,
    pub airtime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleBlock {
    #[serde(default = "default_k")]
    pub k: u64,
    pub candidates: Vec<CandidateSpec>,
    #[serde(default)]
    pub actions: Vec<f64>,
    /// Prior anchor; the cycle start when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// Prior covariance; `run.prior_scale · I` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Rows>,
}

fn default_k() -> u64 {
    1
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: SystemModel,
    pub channel: ChannelConfig,
    pub run: RunSpec,
}

impl Experiment {
    /// The configured single cycle, if any.
    pub fn cycle_context(&self) -> Result<Option<CycleContext>> {
        let Some(cb) = &self.config.cycle else {
            return Ok(None);
        };
        let start = (cb.k.max(1) - 1) as f64 * self.model.period();
        let prior = match &cb.prior {
            Some(rows) => CovMatrix::checked(to_matrix(rows, 0)?)?,
            None => self.run.prior.clone(),
        };
        let cands = cb
            .candidates
            .iter()
            .map(|c| Candidate {
                observer: c.observer,
                timestamp: c.timestamp,
                airtime: c.airtime,
            })
            .collect();
        CycleContext::new(
            cands,
            cb.actions.clone(),
            self.model.period(),
            start,
            cb.t0.unwrap_or(start),
            prior,
        )
        .map(Some)
    }

    /// The configured single cycle, or cycle 1 drawn from the model and channel.
    pub fn schedule_context(&self) -> Result<CycleContext> {
        match self.cycle_context()? {
            Some(ctx) => Ok(ctx),
            None => self.sampled_context(1),
        }
    }

    /// Cycle `k` with timestamps from the model and airtimes from the channel,
    /// anchored at the cycle start with the run prior.
    pub fn sampled_context(&self, k: u64) -> Result<CycleContext> {
        let times = cycle_candidates(&self.model, k)?;
        let ids: Vec<usize> = times.iter().map(|c| c.observer).collect();
        let air = sample_airtimes(&self.channel, k, &ids)?;
        let cands = times
            .iter()
            .zip(&air.observations)
            .map(|(c, &airtime)| Candidate {
                observer: c.observer,
                timestamp: c.timestamp,
                airtime,
            })
            .collect();
        let start = (k.max(1) - 1) as f64 * self.model.period();
        CycleContext::new(cands, air.actions, self.model.period(), start, start, self.run.prior.clone())
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| OspError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        OspError::Config(msg) => OspError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates configuration text. Relative trace paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<Experiment> {
    let config: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| OspError::Config(e.to_string()))?;
    config.build(Some(text), base)
}

/// Collected validation failures, each prefixed with its source line when known.
struct Violations<'t> {
    text: Option<&'t str>,
    list: Vec<String>,
}

impl Violations<'_> {
    fn push(&mut self, key: &str, msg: impl Into<String>) {
        let field = key.rsplit('.').next().unwrap_or(key);
        let line = self.text.and_then(|t| line_of(t, field));
        let msg = msg.into();
        self.list.push(match line {
            Some(l) => format!("line {l}: {key}: {msg}"),
            None => format!("{key}: {msg}"),
        });
    }
}

fn line_of(text: &str, field: &str) -> Option<usize> {
    let needle = format!("\"{field}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn shape(rows: &Rows) -> std::result::Result<(usize, usize), String> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!("row {i} has {} entries, row 0 has {cols}", r.len()));
    }
    if let Some(v) = rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(format!("entry {v} is not finite"));
    }
    Ok((rows.len(), cols))
}

/// Row-major nested arrays to a matrix with `cols_if_empty` columns when there are no rows.
pub fn to_matrix(rows: &Rows, cols_if_empty: usize) -> Result<Matrix> {
    let (r, c) = shape(rows).map_err(OspError::Config)?;
    if r == 0 {
        return Ok(Matrix::zeros(0, cols_if_empty));
    }
    Ok(Matrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

pub fn to_rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ExperimentConfig {
    /// Validates everything and builds the runnable pieces.
    pub fn build(&self, text: Option<&str>, base: &Path) -> Result<Experiment> {
        let mut v = Violations {
            text,
            list: Vec::new(),
        };
        let m = &self.model;
        let mut dims = |key: &str, rows: &Rows| match shape(rows) {
            Ok(d) => Some(d),
            Err(e) => {
                v.push(key, e);
                None
            }
        };
        let a = dims("model.a", &m.a);
        let b = dims("model.b", &m.b);
        let c = dims("model.c", &m.c);
        let q = dims("model.q", &m.q);
        let s = a.map(|(r, _)| r);
        if let Some((r, cc)) = a {
            if r == 0 || r != cc {
                v.push("model.a", format!("must be square and non-empty, got {r}x{cc}"));
            }
        }
        if let (Some(s), Some((br, _))) = (s, b) {
            if br != s {
                v.push("model.b", format!("expected {s} rows, got {br}"));
            }
        }
        if let (Some(s), Some((_, cc))) = (s, c) {
            if cc != s && !m.c.is_empty() {
                v.push("model.c", format!("expected {s} columns, got {cc}"));
            }
        }
        if let (Some(s), Some((qr, qc))) = (s, q) {
            if qr != s || qc != s {
                v.push("model.q", format!("expected {s}x{s}, got {qr}x{qc}"));
            }
        }
        let n = m.c.len();
        let r_matrix = match (&m.r, &m.r_bits) {
            (Some(_), Some(_)) => {
                v.push("model.r_bits", "give either r or r_bits, not both");
                None
            }
            (None, None) => {
                v.push("model.r", "observation noise missing: give r or r_bits");
                None
            }
            (Some(rows), None) => match shape(rows) {
                Err(e) => {
                    v.push("model.r", e);
                    None
                }
                Ok((rr, rc)) => {
                    if rr != n || rc != n {
                        v.push("model.r", format!("expected {n}x{n}, got {rr}x{rc}"));
                    }
                    let off = (0..rr).flat_map(|i| (0..rc).map(move |j| (i, j))).find(|&(i, j)| {
                        i != j && rows[i][j] != 0.0
                    });
                    if let Some((i, j)) = off {
                        v.push(
                            "model.r",
                            format!(
                                "R must be diagonal (observations are fused as independent scalar \
                                 updates), but R[{i}][{j}] = {}",
                                rows[i][j]
                            ),
                        );
                    }
                    if let Some(i) = (0..rr.min(rc)).find(|&i| rows[i][i] <= 0.0) {
                        v.push("model.r", format!("diagonal entries must be positive, R[{i}][{i}] = {}", rows[i][i]));
                    }
                    to_matrix(rows, n).ok()
                }
            },
            (None, Some(bits)) => {
                if bits.chars().count() != n {
                    v.push("model.r_bits", format!("has {} entries, C has {n} rows", bits.chars().count()));
                }
                match presets::r_from_bitstring(bits) {
                    Ok(r) => Some(r),
                    Err(e) => {
                        v.push("model.r_bits", e.to_string());
                        None
                    }
                }
            }
        };
        if !(m.period > 0.0 && m.period.is_finite()) {
            v.push("model.period", format!("must be positive, got {}", m.period));
        }
        if m.observer_periods.len() != n {
            v.push(
                "model.observer_periods",
                format!("expected {n} entries (one per row of c), got {}", m.observer_periods.len()),
            );
        }
        if let Some((i, p)) = m.observer_periods.iter().enumerate().find(|(_, p)| !(**p > 0.0 && p.is_finite())) {
            v.push("model.observer_periods", format!("entry {i} must be positive, got {p}"));
        }

        let ch = &self.channel;
        let channel = self.build_channel(&mut v, n, base);
        if let Some(agents) = ch.agents {
            if ch.trace.is_none() {
                v.push("channel.agents", format!("only meaningful with a trace (got {agents})"));
            }
        }

        let run = &self.run;
        if run.cycles < 1 {
            v.push("run.cycles", "must be at least 1");
        }
        if !(run.prior_scale > 0.0 && run.prior_scale.is_finite()) {
            v.push("run.prior_scale", format!("must be positive, got {}", run.prior_scale));
        }
        if let (Some(x), Some(s)) = (&run.initial_state, s) {
            if x.len() != s {
                v.push("run.initial_state", format!("expected {s} entries, got {}", x.len()));
            }
        }
        if let (Some(u), Some((_, bc))) = (&run.input, b) {
            if u.len() != bc {
                v.push("run.input", format!("expected {bc} entries (columns of b), got {}", u.len()));
            }
        }
        if let Some(name) = &run.preset {
            if !presets::PRESET_NAMES.contains(&name.as_str()) {
                v.push("run.preset", format!("unknown preset {name:?}"));
            }
        }
        if let (Some(cb), Some(s)) = (&self.cycle, s) {
            if let Some(o) = cb.candidates.iter().find(|c| c.observer >= n) {
                v.push("cycle.candidates", format!("observer {} out of range ({n} observers)", o.observer));
            }
            if cb.k < 1 {
                v.push("cycle.k", "must be at least 1");
            }
            if let Some(p) = &cb.prior {
                match shape(p) {
                    Ok((pr, pc)) if pr != s || pc != s => {
                        v.push("cycle.prior", format!("expected {s}x{s}, got {pr}x{pc}"))
                    }
                    Err(e) => v.push("cycle.prior", e),
                    _ => {}
                }
            }
        }

        if !v.list.is_empty() {
            return Err(OspError::Config(v.list.join("\n")));
        }
        let s = s.unwrap_or(0);
        let model = SystemModel::new(
            to_matrix(&m.a, s)?,
            to_matrix(&m.b, 0)?,
            to_matrix(&m.c, s)?,
            to_matrix(&m.q, s)?,
            r_matrix.unwrap_or_else(|| Matrix::zeros(n, n)),
            m.period,
            m.observer_periods.clone(),
        )
        .map_err(|e| OspError::Config(e.to_string()))?;
        let inputs = match &run.input {
            Some(u) => InputSchedule::Constant(Vector::from_vec(u.clone())),
            None => InputSchedule::Zero,
        };
        let spec = RunSpec {
            policy: run.policy,
            cycles: run.cycles,
            prior: CovMatrix::scaled_identity(s, run.prior_scale),
            initial_state: run.initial_state.clone().map(Vector::from_vec),
            inputs,
        };
        let exp = Experiment {
            config: self.clone(),
            model,
            channel: channel.expect("channel validated above"),
            run: spec,
        };
        exp.cycle_context().map_err(|e| OspError::Config(format!("cycle: {e}")))?;
        Ok(exp)
    }

    fn build_channel(&self, v: &mut Violations, n: usize, base: &Path) -> Option<ChannelConfig> {
        let ch = &self.channel;
        let has_dist = ch.observer_airtime.is_some() || ch.action_airtime.is_some();
        let source = match (&ch.trace, has_dist) {
            (Some(_), true) => {
                v.push("channel.trace", "give either airtime distributions or a trace, not both");
                return None;
            }
            (None, false) => {
                v.push("channel.observer_airtime", "airtime distributions or a trace are required");
                return None;
            }
            (Some(path), false) => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                match AirtimeTrace::load(&full, ch.agents.unwrap_or(0)) {
                    Ok(t) => AirtimeSource::Trace(t),
                    Err(e) => {
                        v.push("channel.trace", e.to_string());
                        return None;
                    }
                }
            }
            (None, true) => {
                let observers = match &ch.observer_airtime {
                    Some(RangeSpec::Shared(r)) => vec![*r; n],
                    Some(RangeSpec::PerObserver(rs)) => rs.clone(),
                    None => {
                        v.push("channel.observer_airtime", "missing");
                        return None;
                    }
                };
                AirtimeSource::Uniform {
                    observers,
                    agents: ch.action_airtime.clone().unwrap_or_default(),
                }
            }
        };
        let cfg = ChannelConfig {
            source,
            seed: ch.seed,
        };
        match cfg.validate(Some(n)) {
            Ok(()) => Some(cfg),
            Err(e) => {
                let key = if e.to_string().contains("agent") {
                    "channel.action_airtime"
                } else {
                    "channel.observer_airtime"
                };
                v.push(key, e.to_string());
                None
            }
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn model_block(model: &SystemModel, r_bits: Option<&str>) -> ModelBlock {
        ModelBlock {
            a: to_rows(model.a()),
            b: to_rows(model.b()),
            c: to_rows(model.c()),
            q: to_rows(model.q().as_matrix()),
            r: r_bits.is_none().then(|| {
                to_rows(&Matrix::from_diagonal(&Vector::from_row_slice(model.r_diag())))
            }),
            r_bits: r_bits.map(str::to_owned),
            period: model.period(),
            observer_periods: model.observer_periods().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{
  "model": {
    "a": [[-1.0]],
    "b": [[1.0]],
    "c": [[1.0]],
    "q": [[0.1]],
    "r": [[0.01]],
    "period": 0.01,
    "observer_periods": [0.01]
  },
  "channel": {
    "seed": 3,
    "observer_airtime": {"lo": 0.001, "hi": 0.002},
    "action_airtime": [{"lo": 0.001, "hi": 0.001}]
  }
}"#;

    fn parse(text: &str) -> Result<Experiment> {
        parse_config(text, Path::new("."))
    }

    #[test]
    fn minimal_scalar_config_loads() {
        let e = parse(SCALAR).unwrap();
        assert_eq!(e.model.state_dim(), 1);
        assert_eq!(e.run.policy, Policy::Bnb);
        assert_eq!(e.run.cycles, 100);
        assert!(e.cycle_context().unwrap().is_none());
    }

    #[test]
    fn wrong_c_columns_names_the_field() {
        let bad = SCALAR.replace(r#""c": [[1.0]]"#, r#""c": [[1.0, 2.0]]"#);
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("model.c"), "{err}");
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn non_diagonal_r_cites_rule() {
        let bad = SCALAR
            .replace(r#""c": [[1.0]]"#, r#""c": [[1.0], [1.0]]"#)
            .replace(r#""r": [[0.01]]"#, r#""r": [[0.01, 0.001], [0.001, 0.01]]"#)
            .replace(r#""observer_periods": [0.01]"#, r#""observer_periods": [0.01, 0.01]"#);
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("diagonal"), "{err}");
        assert!(err.contains("independent scalar"), "{err}");
    }

    #[test]
    fn every_violation_is_listed() {
        let bad = SCALAR
            .replace(r#""period": 0.01"#, r#""period": -0.01"#)
            .replace(r#""q": [[0.1]]"#, r#""q": [[0.1, 0.0]]"#);
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("model.period"), "{err}");
        assert!(err.contains("model.q"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("{\n  \"model\": [\n").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = SCALAR.replace(r#""seed": 3,"#, r#""seed": 3, "sead": 4,"#);
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn trace_and_distributions_are_exclusive() {
        let bad = SCALAR.replace(r#""seed": 3,"#, r#""seed": 3, "trace": "t.csv","#);
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("not both"), "{err}");
    }

    #[test]
    fn cycle_block_builds_context() {
        let text = SCALAR.replacen(
            "\"channel\"",
            r#""cycle": {"k": 2, "candidates": [{"observer": 0, "timestamp": 0.012, "airtime": 0.001}], "actions": [0.002]},
  "channel""#,
            1,
        );
        let e = parse(&text).unwrap();
        let ctx = e.cycle_context().unwrap().unwrap();
        assert_eq!(ctx.len(), 1);
        assert!((ctx.boundary() - 0.02).abs() < 1e-15);
        assert!((ctx.budget() - 0.008).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let e = parse(SCALAR).unwrap();
        let again = parse(&e.config.to_json()).unwrap();
        assert_eq!(again.config, e.config);
    }

    #[test]
    fn schedule_context_falls_back_to_first_cycle() {
        let e = parse(SCALAR).unwrap();
        let ctx = e.schedule_context().unwrap();
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx.candidates()[0].timestamp, 0.0);
        assert!((0.001..=0.002).contains(&ctx.candidates()[0].airtime));
        assert_eq!(ctx.action_airtimes(), &[0.001]);
        assert_eq!(ctx.cycle_start(), 0.0);
        assert_eq!(e.schedule_context().unwrap().candidates(), ctx.candidates());
    }

    #[test]
    fn sampled_context_matches_the_simulated_cycle() {
        let e = parse(SCALAR).unwrap();
        let mut run = e.run.clone();
        run.cycles = 5;
        let logs = crate::sim::run_simulation(&e.model, &e.channel, &run).unwrap();
        for log in &logs {
            let ctx = e.sampled_context(log.cycle).unwrap();
            let sim = log.context(e.model.period()).unwrap();
            assert_eq!(ctx.candidates(), sim.candidates());
            assert_eq!(ctx.action_airtimes(), sim.action_airtimes());
            assert_eq!(ctx.cycle_start(), sim.cycle_start());
        }
    }
}
