use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("device {device} spends {spent:e} J but holds {available:e} J")]
    EnergyCausality { device: usize, spent: f64, available: f64 },

    #[error("slot {slot}: infeasible decision: {violation}")]
    Infeasible { slot: usize, violation: Violation },

    #[error("topology parse error on line {line}: {msg}")]
    TopologyParse { line: usize, msg: String },
}
