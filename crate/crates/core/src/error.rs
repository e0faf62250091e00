use thiserror::Error;

use crate::flow::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("task {task}: {message}")]
    InvalidTask { task: usize, message: String },

    #[error("invalid task system: {0}")]
    InvalidSystem(String),

    #[error("release of task {task} at time {time} is illegal: {reason}")]
    IllegalRelease {
        task: usize,
        time: usize,
        reason: String,
    },

    #[error("invalid schedule step {step}: {reason}")]
    InvalidStep { step: String, reason: String },

    #[error("horizon {horizon} is shorter than the required {required}")]
    HorizonTooShort { horizon: usize, required: usize },

    #[error("strategy undefined for configuration {config} with release {release}")]
    StrategyIncomplete { config: String, release: String },

    #[error("resource limit exceeded: more than {limit} {what}")]
    ResourceLimit { what: &'static str, limit: u64 },

    #[error("state space size does not fit in 128 bits")]
    Unbounded,

    #[error("task system is not online feasible")]
    NotOnlineFeasible,

    #[error("invalid priority order: {0}")]
    InvalidOrder(String),

    #[error("job {index}: {message}")]
    InvalidJob { index: usize, message: String },

    #[error("continuous schedule rejected: {0}")]
    Continuous(Violation),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
