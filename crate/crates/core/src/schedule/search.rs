//! Branch-and-bound over the subset forest, the FCFS greedy baseline, and the
//! exhaustive oracle. All three share one tie-break so their answers compare.
//!
//! There is no bounding function: the only pruning is feasibility. Once
//! appending `j` to `𝔰` breaks the deadline, every extension of `(𝔰, j)` does
//! too, because the end-of-harvest time only grows. Later siblings are still
//! tried since a shorter airtime may fit where `j` did not.

use super::{extend_harvest, CycleContext, ObsSequence, ScheduleEvaluation};
use crate::error::{OspError, Result};
use crate::kalman::{boundary_predict, g_step, sequence_mse, Discretize, StepCache};
use crate::linalg::CovMatrix;
use crate::model::SystemModel;

/// Largest candidate count the oracle will enumerate.
pub const EXHAUSTIVE_MAX_L: usize = 20;

/// Relative MSE tolerance below which two sequences count as tied.
const TIE_RTOL: f64 = 1e-12;

/// Whether `(mse_a, a)` beats `(mse_b, b)`: lower MSE, then fewer
/// observations, then the lexicographically smaller index tuple.
fn preferred(mse_a: f64, a: &[usize], mse_b: f64, b: &[usize]) -> bool {
    let tol = TIE_RTOL * mse_a.abs().max(mse_b.abs());
    if mse_a < mse_b - tol {
        return true;
    }
    if mse_a > mse_b + tol {
        return false;
    }
    (a.len(), a) < (b.len(), b)
}

struct Incumbent {
    seq: ObsSequence,
    d: f64,
    mse: f64,
    running: CovMatrix,
}

impl Incumbent {
    fn offer(&mut self, seq: &ObsSequence, d: f64, mse: f64, running: &CovMatrix) {
        if preferred(mse, seq.positions(), self.mse, self.seq.positions()) {
            self.seq = seq.clone();
            self.d = d;
            self.mse = mse;
            self.running = running.clone();
        }
    }

    fn finish(self, ctx: &CycleContext, nodes_visited: u64, forced_empty: bool) -> ScheduleEvaluation {
        let observers = self
            .seq
            .positions()
            .iter()
            .map(|&p| ctx.candidates()[p].observer)
            .collect();
        ScheduleEvaluation {
            seq: self.seq,
            observers,
            end_of_harvest: self.d,
            mse: self.mse,
            running_cov: self.running,
            nodes_visited,
            forced_empty,
        }
    }
}

fn check_model(ctx: &CycleContext, model: &SystemModel) -> Result<()> {
    if ctx.prior().dim() != model.state_dim() {
        return Err(OspError::Dimension(format!(
            "prior covariance is {0}x{0}, model state dimension is {1}",
            ctx.prior().dim(),
            model.state_dim()
        )));
    }
    if let Some(c) = ctx.candidates().iter().find(|c| c.observer >= model.num_observers()) {
        return Err(OspError::Domain(format!(
            "candidate observer {} out of range (model has {})",
            c.observer,
            model.num_observers()
        )));
    }
    Ok(())
}

/// The empty sequence: predict the prior straight to the boundary.
fn empty_incumbent<D: Discretize + ?Sized>(ctx: &CycleContext, dynamics: &D) -> Result<Incumbent> {
    let mse = boundary_predict(dynamics, ctx.prior(), ctx.t0(), ctx.boundary())?.trace();
    Ok(Incumbent {
        seq: ObsSequence::empty(),
        d: 0.0,
        mse,
        running: ctx.prior().clone(),
    })
}

/// Evaluates one sequence from scratch. Does not require it to be schedulable.
pub fn evaluate_sequence(
    ctx: &CycleContext,
    model: &SystemModel,
    seq: &ObsSequence,
) -> Result<ScheduleEvaluation> {
    check_model(ctx, model)?;
    let d = super::end_of_harvest(seq, ctx)?;
    let (mse, running) = sequence_mse(model, ctx.prior(), ctx.t0(), &ctx.times(seq), ctx.boundary())?;
    let inc = Incumbent {
        seq: seq.clone(),
        d,
        mse,
        running,
    };
    Ok(inc.finish(ctx, 1, false))
}

struct Dfs<'a, D: ?Sized> {
    ctx: &'a CycleContext,
    dynamics: &'a D,
    best: Incumbent,
    nodes: u64,
}

impl<D: Discretize + ?Sized> Dfs<'_, D> {
    /// Tries every extension `(seq, j)` with `j ≥ from`, given the state after `seq`.
    fn explore(
        &mut self,
        seq: &mut ObsSequence,
        from: usize,
        d: f64,
        last_t: f64,
        running: &CovMatrix,
    ) -> Result<()> {
        for j in from..self.ctx.len() {
            self.nodes += 1;
            let dj = extend_harvest(d, self.ctx.offset(j), self.ctx.airtime(j));
            if dj >= self.ctx.budget() {
                continue;
            }
            let cand = self.ctx.candidates()[j];
            let post = g_step(self.dynamics, running, last_t, cand.timestamp, cand.observer)?;
            let mse = boundary_predict(self.dynamics, &post, cand.timestamp, self.ctx.boundary())?.trace();
            seq.push(j);
            self.best.offer(seq, dj, mse, &post);
            self.explore(seq, j + 1, dj, cand.timestamp, &post)?;
            seq.pop();
        }
        Ok(())
    }
}

/// MSE-optimal schedulable sequence by depth-first search of the subset forest.
///
/// `nodes_visited` counts the empty sequence plus every feasibility check.
/// When `B ≤ 0` nothing is schedulable and the empty sequence is returned
/// with `forced_empty` set.
pub fn bnb_search(ctx: &CycleContext, model: &SystemModel) -> Result<ScheduleEvaluation> {
    check_model(ctx, model)?;
    let cache = StepCache::new(model);
    let best = empty_incumbent(ctx, &cache)?;
    if ctx.budget() <= 0.0 {
        return Ok(best.finish(ctx, 1, true));
    }
    let mut dfs = Dfs {
        ctx,
        dynamics: &cache,
        best,
        nodes: 1,
    };
    let prior = ctx.prior().clone();
    dfs.explore(&mut ObsSequence::empty(), 0, 0.0, ctx.t0(), &prior)?;
    let nodes = dfs.nodes;
    log::debug!("bnb: L = {}, nodes visited = {nodes}", ctx.len());
    Ok(dfs.best.finish(ctx, nodes, false))
}

/// First-come-first-served: walk candidates in time order and take each one
/// that still fits. Ignores observation quality entirely.
pub fn greedy_search(ctx: &CycleContext, model: &SystemModel) -> Result<ScheduleEvaluation> {
    check_model(ctx, model)?;
    let cache = StepCache::new(model);
    if ctx.budget() <= 0.0 {
        return Ok(empty_incumbent(ctx, &cache)?.finish(ctx, 1, true));
    }
    let mut seq = ObsSequence::empty();
    let mut d = 0.0;
    let mut nodes = 1;
    for j in 0..ctx.len() {
        nodes += 1;
        let dj = extend_harvest(d, ctx.offset(j), ctx.airtime(j));
        if dj < ctx.budget() {
            seq.push(j);
            d = dj;
        }
    }
    let (mse, running) = sequence_mse(&cache, ctx.prior(), ctx.t0(), &ctx.times(&seq), ctx.boundary())?;
    Ok(Incumbent {
        seq,
        d,
        mse,
        running,
    }
    .finish(ctx, nodes, false))
}

/// Enumerates all `2^L` subsets and evaluates each from scratch. Ground truth
/// for tests; refuses `L > EXHAUSTIVE_MAX_L`.
pub fn exhaustive_oracle(ctx: &CycleContext, model: &SystemModel) -> Result<ScheduleEvaluation> {
    check_model(ctx, model)?;
    let l = ctx.len();
    if l > EXHAUSTIVE_MAX_L {
        return Err(OspError::SizeGuard(format!(
            "exhaustive search over {l} candidates exceeds the limit of {EXHAUSTIVE_MAX_L}"
        )));
    }
    let mut best = empty_incumbent(ctx, model)?;
    if ctx.budget() <= 0.0 {
        return Ok(best.finish(ctx, 1, true));
    }
    let total = 1u64 << l;
    for mask in 1..total {
        let seq = ObsSequence((0..l).filter(|&i| mask >> i & 1 == 1).collect());
        let d = super::end_of_harvest(&seq, ctx)?;
        if d >= ctx.budget() {
            continue;
        }
        let (mse, running) = sequence_mse(model, ctx.prior(), ctx.t0(), &ctx.times(&seq), ctx.boundary())?;
        best.offer(&seq, d, mse, &running);
    }
    Ok(best.finish(ctx, total, false))
}
