//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("unknown space identifier `{0}`")]
    UnknownSpace(String),

    #[error("factor `{factor}` value {value} out of range (cardinality {cardinality})")]
    FactorOutOfRange {
        factor: String,
        value: usize,
        cardinality: usize,
    },

    #[error("assignment has {actual} coordinates, space `{space}` has {expected} factors")]
    ArityMismatch {
        space: String,
        expected: usize,
        actual: usize,
    },

    #[error("flat index {index} out of range for space of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },

    #[error("invalid factor definition: {0}")]
    InvalidFactor(String),

    #[error("invalid relation: {0}")]
    InvalidRelation(String),

    #[error("expected {expected} panels, got {actual}")]
    PanelCount { expected: usize, actual: usize },

    #[error("generation rejection cap exceeded in stage `{stage}` (seed {seed})")]
    GenerationCap { stage: &'static str, seed: u64 },

    #[error("representation lookup miss for flat index {index}")]
    CoverageMiss { index: u64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no active dimensions (all code variances below floor)")]
    NoActiveDimensions,

    #[error("shape mismatch at layer {layer}: expected input {expected}, got {actual}")]
    ShapeMismatch {
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("stale activation cache: {0}")]
    StaleCache(String),

    #[error("non-finite gradient at `{path}`")]
    NonFiniteGradient { path: String },

    #[error("non-finite loss at step {step} (config {digest})")]
    NonFiniteLoss { step: usize, digest: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("output `{0}` already exists (use --force to overwrite)")]
    OutputExists(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
