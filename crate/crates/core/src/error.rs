use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("duplicate channel: {0}")]
    DuplicateChannel(String),
    #[error("unknown operator: {0}")]
    UnknownOperator(String),
    #[error("precondition of {operator} violated: {literal}")]
    PreconditionViolation { operator: String, literal: String },
    #[error("no plan: {0}")]
    NoPlan(String),
    #[error("sampler diverged: {0}")]
    Divergence(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("plan validation failed: {0}")]
    PlanValidation(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
