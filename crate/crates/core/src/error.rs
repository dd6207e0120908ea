use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("root finder did not reach tolerance for target {target}")]
    Convergence { target: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(&'static str),

    #[error("value {value} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("tabulated function violates {property} at index {index}")]
    Shape { property: &'static str, index: usize },

    #[error("insufficient data: {have} samples, need at least {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("breakpoint overflow after completing level {achieved_level}")]
    Overflow { achieved_level: usize },

    #[error("tail family outside the closed-form catalogue")]
    UnsupportedFamily,
}

pub type Result<T> = core::result::Result<T, Error>;
