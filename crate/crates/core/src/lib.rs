//! Deadline-aware observer selection for multirate Kalman estimation.
//!
//! Each decision cycle of length `T`, an executive harvests some of the
//! observations its sensors produced, then dispatches actions before `kT`.
//! [`schedule::bnb_search`] picks the harvestable sequence that minimizes the
//! predicted estimation MSE at the boundary; [`sim`] runs it cycle by cycle.
//!
//! ```no_run
//! use ospkit::config::load_config;
//! use ospkit::bnb_search;
//!
//! let exp = load_config("blackout.json".as_ref())?;
//! let ctx = exp.schedule_context()?;
//! let best = bnb_search(&ctx, &exp.model)?;
//! println!("{} mse={} d={}", best.seq, best.mse, best.end_of_harvest);
//! # Ok::<(), ospkit::OspError>(())
//! ```

pub mod config;
pub mod error;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod report;
pub mod schedule;
pub mod sim;
pub mod timing;

pub use error::{OspError, Result};
pub use linalg::{CovMatrix, Matrix, Vector};
pub use model::SystemModel;
pub use schedule::{
    bnb_search, exhaustive_oracle, greedy_search, Candidate, CycleContext, ObsSequence,
    ScheduleEvaluation,
};
