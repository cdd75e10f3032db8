//! The three-state example plant and its observer configurations.

use crate::config::{ChannelBlock, ExperimentConfig, ModelBlock, OutputBlock, RangeSpec, RunBlock};
use crate::error::{OspError, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::SystemModel;
use crate::sim::{Policy, UniformRange};

/// Decision period of the example, in seconds.
pub const REFERENCE_PERIOD: f64 = 0.01;
/// Variance of a precise observer.
pub const SIGMA0_SQ: f64 = 1e-2;
/// Variance of a noisy observer.
pub const SIGMA1_SQ: f64 = 1.0;
/// Process noise intensity; `Q = REFERENCE_Q_SCALE · I`.
pub const REFERENCE_Q_SCALE: f64 = 1e-2;

pub fn reference_a() -> Matrix {
    Matrix::from_row_slice(
        3,
        3,
        &[-10.0, 1.0, 0.0, -0.02, -2.0, 156.3, 0.0, 0.0, -1000.0],
    )
}

pub fn reference_b() -> Matrix {
    Matrix::from_column_slice(3, 1, &[0.0, 0.0, 64.0])
}

pub fn reference_q() -> Matrix {
    Matrix::identity(3, 3) * REFERENCE_Q_SCALE
}

/// Six observers, two per state component, each reading that component directly.
pub fn reference_c1() -> Matrix {
    Matrix::from_row_slice(
        6,
        3,
        &[
            1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0,
        ],
    )
}

/// Six observers in three identical pairs, each reading a mix of all components.
pub fn reference_c2() -> Matrix {
    Matrix::from_row_slice(
        6,
        3,
        &[
            -0.684, 0.763, 0.144, //
            -0.684, 0.763, 0.144, //
            0.504, 0.765, 0.532, //
            0.504, 0.765, 0.532, //
            2.180, -0.554, -0.632, //
            2.180, -0.554, -0.632,
        ],
    )
}

/// Diagonal `R` from a bitstring: `'0'` is a precise observer, `'1'` a noisy one.
pub fn r_from_bitstring(bits: &str) -> Result<Matrix> {
    let diag = bits
        .chars()
        .map(|ch| match ch {
            '0' => Ok(SIGMA0_SQ),
            '1' => Ok(SIGMA1_SQ),
            other => Err(OspError::Config(format!(
                "noise bitstring may only contain '0' and '1', found {other:?} in {bits:?}"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_diagonal(&Vector::from_vec(diag)))
}

/// The example plant with the given observer matrix, noise pattern and periods.
pub fn reference_model(c: Matrix, bits: &str, observer_periods: Vec<f64>) -> Result<SystemModel> {
    if bits.chars().count() != c.nrows() {
        return Err(OspError::Config(format!(
            "noise bitstring {bits:?} has {} entries, C has {} rows",
            bits.chars().count(),
            c.nrows()
        )));
    }
    SystemModel::new(
        reference_a(),
        reference_b(),
        c,
        reference_q(),
        r_from_bitstring(bits)?,
        REFERENCE_PERIOD,
        observer_periods,
    )
}

/// Scenario configurations shipped with the library.
pub const PRESET_NAMES: &[&str] = &[
    "rate-fast",
    "rate-slow",
    "blackout-6of6",
    "blackout-6of6-001000",
    "blackout-6of6-000010",
    "unconstrained",
    "baseline-compare",
    "baseline-benign",
];

fn range(lo: f64, hi: f64) -> UniformRange {
    UniformRange { lo, hi }
}

fn scenario(
    name: &str,
    model: ModelBlock,
    observer_airtime: RangeSpec,
    action_airtime: Vec<UniformRange>,
    cycles: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        model,
        channel: ChannelBlock {
            seed: 1,
            observer_airtime: Some(observer_airtime),
            action_airtime: Some(action_airtime),
            trace: None,
            agents: None,
        },
        run: RunBlock {
            policy: Policy::Bnb,
            cycles,
            prior_scale: 1.0,
            preset: Some(name.to_owned()),
            initial_state: None,
            input: None,
        },
        output: OutputBlock::default(),
        cycle: None,
    }
}

fn reference_block(c: Matrix, bits: &str, observer_periods: Vec<f64>) -> ModelBlock {
    let model = reference_model(c, bits, observer_periods).expect("preset model is valid");
    ExperimentConfig::model_block(&model, Some(bits))
}

/// One observer reading the first row of `C2`, sampling every `obs_period`.
fn rate_model(obs_period: f64) -> ModelBlock {
    let c = reference_c2().rows(0, 1).into_owned();
    reference_block(c, "0", vec![obs_period])
}

/// The named scenario. See [`PRESET_NAMES`].
pub fn preset_config(name: &str) -> Result<ExperimentConfig> {
    let all_t = vec![REFERENCE_PERIOD; 6];
    let cfg = match name {
        "rate-fast" | "rate-slow" => {
            let tn = if name == "rate-fast" { 0.003 } else { 0.053 };
            scenario(
                name,
                rate_model(tn),
                RangeSpec::Shared(range(1e-4, 2e-4)),
                vec![range(1e-3, 1e-3)],
                300,
            )
        }
        "blackout-6of6" | "blackout-6of6-001000" | "blackout-6of6-000010" => {
            let bits = name.strip_prefix("blackout-6of6-").unwrap_or("100000");
            // Roughly 2 ms per observation against an 8.45 ms budget: four fit, five never do.
            scenario(
                name,
                reference_block(reference_c2(), bits, all_t),
                RangeSpec::Shared(range(1.9e-3, 2.1e-3)),
                vec![range(1.5e-3, 1.6e-3)],
                100,
            )
        }
        "unconstrained" => scenario(
            name,
            reference_block(reference_c1(), "000000", all_t),
            RangeSpec::Shared(range(5e-4, 1e-3)),
            vec![range(1e-4, 2e-4)],
            100,
        ),
        "baseline-compare" => {
            // The first observer in line needs most of the cycle.
            let mut per = vec![range(5e-4, 1e-3); 6];
            per[0] = range(7e-3, 8e-3);
            scenario(
                name,
                reference_block(reference_c2(), "000000", all_t),
                RangeSpec::PerObserver(per),
                vec![range(1e-3, 1e-3)],
                100,
            )
        }
        "baseline-benign" => scenario(
            name,
            reference_block(reference_c2(), "000000", all_t),
            RangeSpec::Shared(range(3e-4, 6e-4)),
            vec![range(1e-3, 1e-3)],
            100,
        ),
        other => {
            return Err(OspError::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(cfg)
}
