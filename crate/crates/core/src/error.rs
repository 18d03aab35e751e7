use thiserror::Error;

use crate::tree::NodePath;

/// Errors raised while building or running probabilistic computations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PplError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid score {0}: scores must be non-negative and not NaN")]
    InvalidScore(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("override value {value} at path {path} is outside [0, 1)")]
    OverrideOutOfRange { path: NodePath, value: f64 },

    #[error("degenerate measure: all {0} weighted runs have zero weight")]
    DegenerateMeasure(usize),

    #[error("single-site proposal needs at least one consumed site, but the run read none")]
    NoSites,

    #[error("could not find a start state with positive weight after {0} attempts")]
    InitFailed(usize),

    #[error("stick-breaking search did not terminate within {0} sticks")]
    StickOverflow(usize),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("model error: {0}")]
    Model(String),
}

impl PplError {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        PplError::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}

pub type Result<T, E = PplError> = std::result::Result<T, E>;
