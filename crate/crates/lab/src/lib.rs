//! Experiments, file formats and command line for `occtime-core`.
//!
//! Trials run in parallel on rayon, each on its own seeded stream, and are
//! merged by trial id, so results do not depend on the thread count.

pub mod config;
pub mod describe;
pub mod error;
pub mod experiments;
pub mod io;
pub mod parallel;

pub use config::{Count, ExperimentConfig, Kind};
pub use error::{LabError, LabResult};
pub use experiments::{run, Check, ExperimentResult, Table};

/// Parse `identical` or `independent`.
pub fn chains_coupling(s: &str) -> Result<occtime_core::chains::Coupling, String> {
    use occtime_core::chains::Coupling;
    match s {
        "identical" => Ok(Coupling::Identical),
        "independent" => Ok(Coupling::Independent),
        _ => Err(format!("unknown coupling `{s}`")),
    }
}
