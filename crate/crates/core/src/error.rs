use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the clustering toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("matrix is asymmetric at ({i}, {j}): {a} vs {b}")]
    AsymmetricMatrix { i: usize, j: usize, a: f64, b: f64 },
    #[error("negative entry {value} at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal entry {value} at ({i}, {i})")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix too small: need at least {min} objects, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("empty input")]
    Empty,

    #[error("invalid simplex point: {0}")]
    InvalidSimplexPoint(String),
    #[error("support is empty")]
    EmptySupport,
    #[error("not an ascent step: halved gap {gap_half} <= 0")]
    NotAscent { gap_half: f64 },
    #[error("replicator dynamics undefined: x^T A x == 0")]
    ZeroDenominator,
    #[error(
        "bad initialization: x^T A x == 0 at the starting point; vertex starts are not viable \
         for replicator dynamics because the zero diagonal makes the denominator vanish"
    )]
    BadInit,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no clusters to assign to")]
    NoClusters,

    #[error("label vectors differ in length: {pred} vs {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("no assigned objects to evaluate")]
    EmptyOverlap,

    #[error("feature row {row} has zero norm")]
    ZeroNormRow { row: usize },
    #[error("value out of range: {0}")]
    RangeError(String),

    #[error("cannot draw {requested} seeds from {available} objects")]
    TooManySeeds { requested: usize, available: usize },
    #[error("sampling pool of {pool} objects cannot supply {requested} seeds")]
    PoolTooSmall { pool: usize, requested: usize },

    #[error("trace is empty")]
    EmptyTrace,
    #[error("need at least {min} points for a decay fit, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("progress identity violated at step {t}: {detail}")]
    IdentityViolated { t: usize, detail: String },
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NotAscent { .. }
            | Error::ZeroDenominator
            | Error::BadInit
            | Error::EmptySupport
            | Error::IdentityViolated { .. }
            | Error::TooFewPoints { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
