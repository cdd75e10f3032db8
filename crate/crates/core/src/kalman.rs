//! Covariance operators behind the sequence MSE, plus the estimate updates the
//! simulator runs on real observation values.
//!
//! The three covariance maps are:
//! * predict `P ↦ Φ(tᵢ,tⱼ) P Φᵀ(tᵢ,tⱼ) + Q(tᵢ,tⱼ)`,
//! * predict-then-update at observer `j` (posterior to posterior),
//! * predict to the cycle boundary `kT`.
//!
//! A sequence's MSE is the trace of the boundary prediction applied after the
//! chain of predict-then-update steps, starting from the prior anchor.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{OspError, Result};
use crate::linalg::{CovMatrix, Vector};
use crate::model::{check_order, Step, SystemModel};
use crate::timing::CandidateTime;

/// Source of discretized dynamics. Lets the search memoize `Φ`/`Q` per
/// interval length without changing any of the covariance maps.
pub trait Discretize {
    fn model(&self) -> &SystemModel;
    fn step(&self, s: f64, t: f64) -> Result<Step>;
}

impl Discretize for SystemModel {
    fn model(&self) -> &SystemModel {
        self
    }

    fn step(&self, s: f64, t: f64) -> Result<Step> {
        SystemModel::step(self, s, t)
    }
}

/// Memoizes discretizations by interval length. Single-threaded.
#[derive(Debug)]
pub struct StepCache<'m> {
    model: &'m SystemModel,
    memo: RefCell<HashMap<u64, Step>>,
}

impl<'m> StepCache<'m> {
    pub fn new(model: &'m SystemModel) -> Self {
        Self {
            model,
            memo: RefCell::new(HashMap::new()),
        }
    }
}

impl Discretize for StepCache<'_> {
    fn model(&self) -> &SystemModel {
        self.model
    }

    fn step(&self, s: f64, t: f64) -> Result<Step> {
        check_order(s, t)?;
        let key = (t - s).to_bits();
        if let Some(hit) = self.memo.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let fresh = self.model.step(0.0, t - s)?;
        self.memo.borrow_mut().insert(key, fresh.clone());
        Ok(fresh)
    }
}

/// Record of one scalar measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct KfUpdateTrace {
    pub innovation_variance: f64,
    pub gain: Vector,
    pub prior_cov: CovMatrix,
    pub posterior_cov: CovMatrix,
}

/// A-priori covariance at `t_j` from the posterior at `t_i`.
pub fn predict_cov<D: Discretize + ?Sized>(
    dynamics: &D,
    p: &CovMatrix,
    t_i: f64,
    t_j: f64,
) -> Result<CovMatrix> {
    check_order(t_i, t_j)?;
    if t_i == t_j {
        return Ok(p.clone());
    }
    let step = dynamics.step(t_i, t_j)?;
    Ok(p.congruence_plus(&step.phi, &step.noise))
}

fn update_parts(p: &CovMatrix, c: &Vector, r: f64) -> Result<(f64, Vector, CovMatrix)> {
    if r.is_nan() || r <= 0.0 {
        return Err(OspError::Domain(format!(
            "observation noise variance must be positive, got {r}"
        )));
    }
    if c.len() != p.dim() {
        return Err(OspError::Dimension(format!(
            "observation row has {} entries, covariance is {}x{}",
            c.len(),
            p.dim(),
            p.dim()
        )));
    }
    let pc = p.as_matrix() * c;
    let e = c.dot(&pc) + r;
    let posterior = CovMatrix::symmetrized(p.as_matrix() - (&pc * pc.transpose()) / e)?;
    Ok((e, pc / e, posterior))
}

/// `P − (1/e)·P c cᵀ P` with `e = cᵀPc + r`.
pub fn scalar_update_cov(p: &CovMatrix, c: &Vector, r: f64) -> Result<(CovMatrix, KfUpdateTrace)> {
    let (e, gain, posterior) = update_parts(p, c, r)?;
    let trace = KfUpdateTrace {
        innovation_variance: e,
        gain,
        prior_cov: p.clone(),
        posterior_cov: posterior.clone(),
    };
    Ok((posterior, trace))
}

/// Posterior at `t_j` after observer `observer` reports, from the posterior at `t_i`.
pub fn g_step<D: Discretize + ?Sized>(
    dynamics: &D,
    p: &CovMatrix,
    t_i: f64,
    t_j: f64,
    observer: usize,
) -> Result<CovMatrix> {
    let model = dynamics.model();
    let c = model.obs_row(observer)?;
    let r = model.obs_noise(observer)?;
    let prior = predict_cov(dynamics, p, t_i, t_j)?;
    Ok(update_parts(&prior, &c, r)?.2)
}

/// Prediction from `t_i` to the cycle boundary.
pub fn boundary_predict<D: Discretize + ?Sized>(
    dynamics: &D,
    p: &CovMatrix,
    t_i: f64,
    boundary: f64,
) -> Result<CovMatrix> {
    predict_cov(dynamics, p, t_i, boundary)
}

/// MSE at `boundary` of harvesting `seq` in order, starting from `prior` at `t0`.
///
/// Returns `(mse, running_cov)`; the running covariance is the posterior after
/// the last observation (the prior itself for an empty sequence), which is all
/// an extension of `seq` needs.
pub fn sequence_mse<D: Discretize + ?Sized>(
    dynamics: &D,
    prior: &CovMatrix,
    t0: f64,
    seq: &[CandidateTime],
    boundary: f64,
) -> Result<(f64, CovMatrix)> {
    let mut last = t0;
    let mut running = prior.clone();
    for obs in seq {
        if obs.timestamp < last {
            return Err(OspError::Ordering(format!(
                "observation of observer {} at {} precedes {}",
                obs.observer, obs.timestamp, last
            )));
        }
        running = g_step(dynamics, &running, last, obs.timestamp, obs.observer)?;
        last = obs.timestamp;
    }
    if boundary < last {
        return Err(OspError::Ordering(format!(
            "boundary {boundary} precedes last observation {last}"
        )));
    }
    let mse = boundary_predict(dynamics, &running, last, boundary)?.trace();
    Ok((mse, running))
}

/// Zero-order-hold action sequence: `u(τ) = u[floor(τ/T)]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InputSchedule {
    #[default]
    Zero,
    Constant(Vector),
    /// One vector per decision cycle, indexed from 0.
    PerCycle(Vec<Vector>),
}

impl InputSchedule {
    fn input(&self, index: usize, dim: usize) -> Result<Option<&Vector>> {
        let u = match self {
            InputSchedule::Zero => return Ok(None),
            InputSchedule::Constant(u) => u,
            InputSchedule::PerCycle(us) => us.get(index).ok_or_else(|| {
                OspError::Config(format!(
                    "no action vector for cycle segment {index} ({} provided)",
                    us.len()
                ))
            })?,
        };
        if u.len() != dim {
            return Err(OspError::Dimension(format!(
                "action vector has {} entries, B has {dim} columns",
                u.len()
            )));
        }
        Ok(Some(u))
    }
}

/// Mean propagation `x(s) ↦ x(t)` under the held inputs, segment by segment
/// across decision-cycle boundaries.
pub fn propagate_estimate(
    model: &SystemModel,
    x: &Vector,
    inputs: &InputSchedule,
    s: f64,
    t: f64,
) -> Result<Vector> {
    check_order(s, t)?;
    if x.len() != model.state_dim() {
        return Err(OspError::Dimension(format!(
            "state has {} entries, model has {}",
            x.len(),
            model.state_dim()
        )));
    }
    // A held constant needs no segmentation; only per-cycle inputs change at boundaries.
    match inputs {
        InputSchedule::Zero => return Ok(model.transition_phi(s, t)? * x),
        InputSchedule::Constant(_) => {
            let mut out = model.transition_phi(s, t)? * x;
            if let Some(u) = inputs.input(0, model.input_dim())? {
                out += model.input_lambda(s, t, t)? * u;
            }
            return Ok(out);
        }
        InputSchedule::PerCycle(_) => {}
    }
    let period = model.period();
    let eps = crate::timing::BOUNDARY_EPS * period;
    let mut x = x.clone();
    let mut a = s;
    while a < t {
        let index = ((a + eps) / period).floor().max(0.0) as usize;
        let boundary = (index + 1) as f64 * period;
        let b = if boundary < t - eps { boundary } else { t };
        x = model.transition_phi(a, b)? * x;
        if let Some(u) = inputs.input(index, model.input_dim())? {
            x += model.input_lambda(a, b, b)? * u;
        }
        a = b;
    }
    Ok(x)
}

/// Fuses one scalar observation `y = cᵀx + w`, `w ~ N(0, r)`.
pub fn update_estimate(
    x: &Vector,
    p: &CovMatrix,
    y: f64,
    c: &Vector,
    r: f64,
) -> Result<(Vector, CovMatrix, KfUpdateTrace)> {
    let (posterior, trace) = scalar_update_cov(p, c, r)?;
    let innovation = y - c.dot(x);
    let x_new = x + &trace.gain * innovation;
    Ok((x_new, posterior, trace))
}
