use std::io;

use thiserror::Error;

/// Errors surfaced to the command line, each with its exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{0}")]
    Hypothesis(String),

    #[error("numerical failure: {0}")]
    Runtime(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) => 1,
            LabError::Hypothesis(_) => 2,
            LabError::Runtime(_) => 3,
            LabError::Io(_) => 4,
        }
    }
}

impl From<occtime_core::Error> for LabError {
    fn from(e: occtime_core::Error) -> Self {
        use occtime_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Domain { .. } => LabError::Validation(e.to_string()),
            E::Hypothesis(_) | E::UnsupportedFamily => LabError::Hypothesis(e.to_string()),
            _ => LabError::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for LabError {
    fn from(e: io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type LabResult<T> = Result<T, LabError>;
