//! Browser bindings for the ospkit demo page. Every entry point takes plain
//! values and returns a JSON string, or an error message.

use std::path::Path;

use ospkit::config::Experiment;
use ospkit::presets::{preset_config, PRESET_NAMES};
use ospkit::schedule::{bnb_search, greedy_search, Candidate, CycleContext, ScheduleEvaluation};
use ospkit::sim::{run_simulation, Policy};
use ospkit::timing::first_obs_timestamp;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

type Out = Result<String, String>;

fn to_json<T: Serialize>(value: &T) -> Out {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn experiment(preset: &str, seed: u32) -> Result<Experiment, String> {
    let cfg = preset_config(preset).map_err(|e| e.to_string())?;
    let mut exp = cfg.build(None, Path::new(".")).map_err(|e| e.to_string())?;
    exp.channel.seed = u64::from(seed);
    Ok(exp)
}

/// Names of the built-in scenarios.
#[wasm_bindgen]
pub fn preset_names() -> Out {
    to_json(&PRESET_NAMES)
}

/// First observation timestamp per cycle (rows) and observer (columns); null when none falls in the cycle.
#[wasm_bindgen]
pub fn timestamp_table(period: f64, obs_periods: &str, cycles: u32) -> Out {
    let periods = obs_periods
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let table = (1..=u64::from(cycles))
        .map(|k| {
            periods
                .iter()
                .map(|&tn| first_obs_timestamp(period, tn, k))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    to_json(&table)
}

#[derive(Serialize)]
struct Solution {
    seq: String,
    observers: Vec<usize>,
    end_of_harvest: f64,
    mse: f64,
    nodes_visited: u64,
}

impl Solution {
    fn new(ctx: &CycleContext, eval: &ScheduleEvaluation) -> Self {
        Self {
            seq: eval.seq.to_string(),
            observers: eval.seq.positions().iter().map(|&p| ctx.candidates()[p].observer).collect(),
            end_of_harvest: eval.end_of_harvest,
            mse: eval.mse,
            nodes_visited: eval.nodes_visited,
        }
    }
}

#[derive(Serialize)]
struct CycleView {
    cycle_start: f64,
    period: f64,
    budget: f64,
    actions: Vec<f64>,
    candidates: Vec<Candidate>,
    bnb: Solution,
    greedy: Solution,
}

/// Draws cycle `k` of a preset and solves it with branch-and-bound and with the greedy baseline.
#[wasm_bindgen]
pub fn solve_cycle(preset: &str, seed: u32, k: u32) -> Out {
    let exp = experiment(preset, seed)?;
    let err = |e: ospkit::OspError| e.to_string();
    let ctx = exp.sampled_context(u64::from(k.max(1))).map_err(err)?;
    let bnb = bnb_search(&ctx, &exp.model).map_err(err)?;
    let greedy = greedy_search(&ctx, &exp.model).map_err(err)?;
    to_json(&CycleView {
        cycle_start: ctx.cycle_start(),
        period: ctx.period(),
        budget: ctx.budget(),
        actions: ctx.action_airtimes().to_vec(),
        candidates: ctx.candidates().to_vec(),
        bnb: Solution::new(&ctx, &bnb),
        greedy: Solution::new(&ctx, &greedy),
    })
}

#[derive(Serialize)]
struct Trace {
    policy: String,
    mse_pred: Vec<f64>,
    sq_err: Vec<f64>,
    harvested: Vec<usize>,
}

/// Runs a preset for `cycles` cycles under `policy` and returns the per-cycle error series.
#[wasm_bindgen]
pub fn simulate(preset: &str, policy: &str, cycles: u32, seed: u32) -> Out {
    let mut exp = experiment(preset, seed)?;
    exp.run.policy = policy.parse::<Policy>().map_err(|e| e.to_string())?;
    exp.run.cycles = u64::from(cycles.max(1));
    let logs = run_simulation(&exp.model, &exp.channel, &exp.run).map_err(|e| e.to_string())?;
    to_json(&Trace {
        policy: exp.run.policy.to_string(),
        mse_pred: logs.iter().map(|l| l.mse_pred).collect(),
        sq_err: logs.iter().map(|l| l.sq_err).collect(),
        harvested: logs.iter().map(|l| l.seq.len()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(out: Out) -> Value {
        serde_json::from_str(&out.unwrap()).unwrap()
    }

    #[test]
    fn timestamp_table_matches_the_grid() {
        let v = parse(timestamp_table(0.01, "0.01, 0.003, 0.025", 3));
        assert_eq!(v[0], serde_json::json!([0.0, 0.0, 0.0]));
        assert_eq!(v[1][1], 0.012);
        assert_eq!(v[1][2], Value::Null);
        assert_eq!(v[2][2], 0.025);
    }

    #[test]
    fn timestamp_table_rejects_bad_input() {
        assert!(timestamp_table(0.01, "0.01,x", 2).is_err());
        assert!(timestamp_table(0.01, "-1", 2).is_err());
    }

    #[test]
    fn solve_cycle_reports_both_solvers() {
        let v = parse(solve_cycle("baseline-compare", 3, 2));
        let bnb = v["bnb"]["mse"].as_f64().unwrap();
        let greedy = v["greedy"]["mse"].as_f64().unwrap();
        assert!(bnb <= greedy * (1.0 + 1e-12));
        assert_eq!(v["candidates"].as_array().unwrap().len(), 6);
        assert!(v["bnb"]["end_of_harvest"].as_f64().unwrap() < v["budget"].as_f64().unwrap());
    }

    #[test]
    fn simulate_returns_one_entry_per_cycle() {
        let v = parse(simulate("unconstrained", "all", 12, 5));
        assert_eq!(v["policy"], "all");
        assert_eq!(v["mse_pred"].as_array().unwrap().len(), 12);
        assert!(v["harvested"].as_array().unwrap().iter().all(|n| n == 6));
    }

    #[test]
    fn unknown_names_are_errors() {
        assert!(simulate("nope", "bnb", 3, 1).is_err());
        assert!(simulate("unconstrained", "random", 3, 1).is_err());
        assert!(solve_cycle("nope", 1, 1).is_err());
    }

    #[test]
    fn preset_list_is_json() {
        let v = parse(preset_names());
        assert_eq!(v.as_array().unwrap().len(), PRESET_NAMES.len());
    }
}
