use alloc::boxed::Box;
use alloc::string::String;

use crate::solver::ConicProgram;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {record}: {message}")]
    Validation { record: String, message: String },
    #[error("unknown line `{0}`")]
    UnknownLine(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("infeasible voltage bounds in island {island}: vmin {vmin} >= vmax {vmax}")]
    InfeasibleBounds { island: usize, vmin: f64, vmax: f64 },
    #[error("model error: {0}")]
    Model(String),
    #[error("missing parameter `{parameter}` on {record}")]
    MissingParameter { record: String, parameter: &'static str },
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("numerical failure: {message}")]
    NumericalFailure {
        message: String,
        node: Option<Box<ConicProgram>>,
    },
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
}

impl Error {
    pub(crate) fn validation(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            message: message.into(),
        }
    }
}
