use thiserror::Error;

/// Errors produced by the ordering engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A predictor column is numerically constant, so no regression
    /// coefficient exists (the deterministic-relation case).
    #[error("zero variance in predictor{}", column.map(|c| format!(" (column {c})")).unwrap_or_default())]
    ZeroVariance { column: Option<usize> },

    /// Two sample points coincide exactly, which breaks the k-NN entropy
    /// estimate (log of a zero distance).
    #[error("degenerate geometry: points {first} and {second} coincide")]
    DegenerateGeometry { first: usize, second: usize },

    /// The lattice search exceeded its expansion budget.
    #[error("search exceeded the node budget of {limit} expansions")]
    TooManyNodes { limit: u64 },

    /// Exhaustive enumeration was requested for too many variables.
    #[error("{p} variables exceed the exhaustive-enumeration limit of {max}")]
    TooLarge { p: usize, max: usize },

    #[error("permutation size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
