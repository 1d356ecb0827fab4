use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("graph generation failed after {attempts} attempts: {msg}")]
    GenerationFailure { attempts: usize, msg: String },

    #[error("round budget exhausted after {rounds} rounds")]
    Timeout { rounds: u64 },

    #[error("instance size {n} exceeds the desk-scale oracle cap {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("subroutine invariant clause {clause} violated: {msg}")]
    InvariantViolation { clause: u8, msg: String },

    #[error("start time went negative (flagged trial)")]
    FlaggedTrial,

    #[error("level budget {budget} exhausted in heads/tails clustering")]
    LevelBudget { budget: usize },

    #[error("forest does not span the graph after {attempts} attempts")]
    NotSpanning { attempts: usize },

    #[error("labels share no cluster")]
    NoSharedCluster,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("internal invariant broke: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
