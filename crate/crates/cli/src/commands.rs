use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ospkit::config::{load_config, Experiment};
use ospkit::presets::{preset_config, PRESET_NAMES};
use ospkit::report::{csv_header, csv_row};
use ospkit::schedule::{bnb_search, evaluate_sequence, exhaustive_oracle, greedy_search, CycleContext, ObsSequence};
use ospkit::sim::{run_simulation, selection_stats, CycleLog, Policy};
use ospkit::timing::first_obs_timestamp;
use ospkit::{OspError, Result};

use crate::{Command, EXIT_MISMATCH};

/// Relative MSE tolerance for the oracle cross-check.
const ORACLE_RTOL: f64 = 1e-9;

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Schedule { config, policy, seed } => schedule(&config, policy, seed),
        Command::Simulate {
            config,
            policy,
            cycles,
            seed,
            out,
            reps,
        } => simulate(&config, policy, cycles, seed, out, reps),
        Command::Oracle {
            config,
            cycles,
            seed,
            reps,
        } => oracle(&config, cycles, seed, reps),
        Command::Timestamps {
            config,
            period,
            obs_periods,
            cycles,
            out,
        } => timestamps(config.as_deref(), period, obs_periods, cycles, out),
        Command::Preset { name, list, out } => preset(name.as_deref(), list, out),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| OspError::Config(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn io_err(e: io::Error) -> OspError {
    OspError::Config(format!("output failed: {e}"))
}

fn load(path: &Path, seed: Option<u64>, cycles: Option<u64>, policy: Option<Policy>) -> Result<Experiment> {
    let mut exp = load_config(path)?;
    if let Some(s) = seed {
        exp.channel.seed = s;
    }
    if let Some(k) = cycles {
        if k < 1 {
            return Err(OspError::Config("--cycles must be at least 1".into()));
        }
        exp.run.cycles = k;
    }
    if let Some(p) = policy {
        exp.run.policy = p;
    }
    Ok(exp)
}

fn observers_of(ctx: &CycleContext, seq: &ObsSequence) -> String {
    if seq.is_empty() {
        return "-".into();
    }
    seq.positions()
        .iter()
        .map(|&p| ctx.candidates()[p].observer.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

fn schedule(config: &Path, policy: Option<Policy>, seed: Option<u64>) -> Result<u8> {
    let exp = load(config, seed, None, policy)?;
    let ctx = exp.schedule_context()?;
    let eval = match exp.run.policy {
        Policy::Bnb => bnb_search(&ctx, &exp.model)?,
        Policy::Greedy => greedy_search(&ctx, &exp.model)?,
        Policy::All => evaluate_sequence(&ctx, &exp.model, &ObsSequence::new((0..ctx.len()).collect())?)?,
        Policy::None => evaluate_sequence(&ctx, &exp.model, &ObsSequence::empty())?,
    };
    println!("policy: {}", exp.run.policy);
    println!("candidates: {}", ctx.len());
    println!("budget: {}", ctx.budget());
    println!("sequence: {}", eval.seq);
    println!("observers: {}", observers_of(&ctx, &eval.seq));
    println!("end_of_harvest: {}", eval.end_of_harvest);
    println!("mse: {}", eval.mse);
    println!("nodes_visited: {}", eval.nodes_visited);
    if eval.forced_empty {
        println!("forced_empty: true");
    }
    Ok(0)
}

fn simulate(
    config: &Path,
    policy: Option<Policy>,
    cycles: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    reps: u64,
) -> Result<u8> {
    let exp = load(config, seed, cycles, policy)?;
    let dest = out.or_else(|| exp.config.output.csv.clone());
    let mut w = open_out(dest.as_deref())?;
    writeln!(w, "{}", csv_header(exp.model.state_dim())).map_err(io_err)?;
    let mut all: Vec<CycleLog> = Vec::new();
    for rep in 0..reps.max(1) {
        let mut channel = exp.channel.clone();
        channel.seed = exp.channel.seed.wrapping_add(rep);
        log::info!("run {} of {} with seed {}", rep + 1, reps, channel.seed);
        let logs = run_simulation(&exp.model, &channel, &exp.run)?;
        for l in &logs {
            writeln!(w, "{}", csv_row(l)).map_err(io_err)?;
        }
        all.extend(logs);
    }
    w.flush().map_err(io_err)?;
    let n = all.len() as f64;
    let mse = all.iter().map(|l| l.mse_pred).sum::<f64>() / n;
    let err = all.iter().map(|l| l.sq_err).sum::<f64>() / n;
    let freq = selection_stats(&all, exp.model.num_observers())?;
    let freq: Vec<String> = freq.iter().enumerate().map(|(i, f)| format!("{i}:{f:.3}")).collect();
    eprintln!(
        "{} cycles, policy {}: mean predicted mse {mse:.6e}, mean squared error {err:.6e}, selection {}",
        all.len(),
        exp.run.policy,
        freq.join(" ")
    );
    Ok(0)
}

fn oracle(config: &Path, cycles: Option<u64>, seed: Option<u64>, reps: u64) -> Result<u8> {
    let exp = load(config, seed, cycles, Some(Policy::Bnb))?;
    let mut contexts: Vec<(String, CycleContext)> = Vec::new();
    if let Some(ctx) = exp.cycle_context()? {
        contexts.push(("configured cycle".into(), ctx));
    }
    for rep in 0..reps.max(1) {
        let mut channel = exp.channel.clone();
        channel.seed = exp.channel.seed.wrapping_add(rep);
        for l in run_simulation(&exp.model, &channel, &exp.run)? {
            contexts.push((format!("seed {} cycle {}", channel.seed, l.cycle), l.context(exp.model.period())?));
        }
    }
    let mut mismatches = 0;
    for (label, ctx) in &contexts {
        let b = bnb_search(ctx, &exp.model)?;
        let o = exhaustive_oracle(ctx, &exp.model)?;
        let rel = (b.mse - o.mse).abs() / o.mse.abs().max(f64::MIN_POSITIVE);
        if b.seq != o.seq || rel > ORACLE_RTOL {
            mismatches += 1;
            println!(
                "{label}: MISMATCH bnb {} (mse {}) vs exhaustive {} (mse {})",
                b.seq, b.mse, o.seq, o.mse
            );
        } else {
            log::debug!("{label}: {} agrees ({} nodes)", b.seq, b.nodes_visited);
        }
    }
    println!("checked {} cycles, {mismatches} mismatches", contexts.len());
    Ok(if mismatches == 0 { 0 } else { EXIT_MISMATCH })
}

fn timestamps(
    config: Option<&Path>,
    period: Option<f64>,
    obs_periods: Option<Vec<f64>>,
    cycles: u64,
    out: Option<PathBuf>,
) -> Result<u8> {
    let (period, obs_periods) = match (config, period, obs_periods) {
        (Some(path), _, _) => {
            let exp = load_config(path)?;
            (exp.model.period(), exp.model.observer_periods().to_vec())
        }
        (None, Some(t), Some(tn)) => (t, tn),
        _ => {
            return Err(OspError::Config(
                "timestamps needs --config, or --period with --obs-periods".into(),
            ))
        }
    };
    let mut w = open_out(out.as_deref())?;
    writeln!(w, "cycle,observer,timestamp").map_err(io_err)?;
    for k in 1..=cycles {
        for (n, &tn) in obs_periods.iter().enumerate() {
            let cell = match first_obs_timestamp(period, tn, k)? {
                Some(t) => format!("{t:?}"),
                None => "-".into(),
            };
            writeln!(w, "{k},{n},{cell}").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(0)
}

fn preset(name: Option<&str>, list: bool, out: Option<PathBuf>) -> Result<u8> {
    if list {
        for n in PRESET_NAMES {
            println!("{n}");
        }
        return Ok(0);
    }
    let name = name.ok_or_else(|| OspError::Config("preset needs a name (or --list)".into()))?;
    let cfg = preset_config(name)?;
    let mut w = open_out(out.as_deref())?;
    w.write_all(cfg.to_json().as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(0)
}
