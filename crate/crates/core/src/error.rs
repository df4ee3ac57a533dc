use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("term {index} with exponents {exponents:?} has total degree {found}, expected {expected}")]
    NonHomogeneous {
        index: usize,
        exponents: Vec<u32>,
        found: u32,
        expected: u32,
    },

    #[error("invalid degree {degree}: {reason}")]
    InvalidDegree { degree: u32, reason: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("degenerate polytope: {0}")]
    DegeneratePolytope(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("level set: {0}")]
    LevelSet(String),

    #[error("malformed input at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
