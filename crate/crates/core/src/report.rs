//! CSV output of simulation logs.

use std::io::{self, Write};

use crate::sim::CycleLog;

/// `%.17g`: 17 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e17)`.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_header(state_dim: usize) -> String {
    let mut h = String::from("cycle,policy,seq,d,budget,mse_pred,sq_err,nodes_visited");
    for prefix in ["x", "xhat"] {
        for i in 0..state_dim {
            h.push_str(&format!(",{prefix}{i}"));
        }
    }
    h
}

/// One row per cycle. `seq` lists observer ids joined by `+`, or `-` when empty.
pub fn csv_row(log: &CycleLog) -> String {
    let seq = if log.observers.is_empty() {
        "-".to_owned()
    } else {
        log.observers.iter().map(usize::to_string).collect::<Vec<_>>().join("+")
    };
    let mut row = format!(
        "{},{},{},{},{},{},{},{}",
        log.cycle,
        log.policy,
        seq,
        fmt_g17(log.end_of_harvest),
        fmt_g17(log.budget),
        fmt_g17(log.mse_pred),
        fmt_g17(log.sq_err),
        log.nodes_visited
    );
    for v in log.x_true.iter().chain(log.x_hat.iter()) {
        row.push(',');
        row.push_str(&fmt_g17(*v));
    }
    row
}

/// Header plus rows, LF line endings.
pub fn write_csv<W: Write>(mut w: W, state_dim: usize, logs: &[CycleLog]) -> io::Result<()> {
    writeln!(w, "{}", csv_header(state_dim))?;
    for log in logs {
        writeln!(w, "{}", csv_row(log))?;
    }
    Ok(())
}
