use thiserror::Error;

use crate::bp::StateId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tree height must be at least 2, got {0}")]
    HeightTooSmall(u32),
    #[error("k must lie in 2..=32, got {0}")]
    BadK(u32),
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("query {0} does not fit the tree shape")]
    MalformedQuery(String),
    #[error("value {value} outside [1, {k}]")]
    ValueOutOfRange { value: u32, k: u32 },
    #[error("budget exceeded: {what} needs {needed}, cap is {cap}")]
    BudgetExceeded {
        what: &'static str,
        needed: String,
        cap: String,
    },
    #[error("malformed branching program: {0}")]
    MalformedProgram(String),
    #[error("branching program is not deterministic (state {0})")]
    NotDeterministic(StateId),
    #[error("no complete computation path for this instance")]
    NoCompletePath,
    #[error("illegal pebble move at step {index}: {reason}")]
    IllegalMove { index: usize, reason: String },
    #[error("invalid pebbling sequence: {0}")]
    InvalidSequence(String),
    #[error("k is not a power of two: {0}")]
    NotPowerOfTwo(u32),
    #[error("premise violated: {0}")]
    Premise(String),
    #[error("counterexample: {0}")]
    Counterexample(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
