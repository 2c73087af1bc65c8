use thiserror::Error;

use crate::game_core::Coalition;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation error at step {step}: {reason}")]
    Simulation { step: usize, reason: String },

    #[error("policy error at step {step}: {reason}")]
    Policy { step: usize, reason: String },

    #[error("divergence in coalition {coalition}: {reason}")]
    Divergence { coalition: Coalition, reason: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("budget exceeded: {reason} (explored {explored} items)")]
    Budget { reason: String, explored: usize },

    #[error("partition infeasible at delta = {delta}: {reason}")]
    Partition { delta: f64, reason: String },

    #[error("grid refinement needed: {0}")]
    Refinement(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
