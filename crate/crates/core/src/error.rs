use thiserror::Error;

use crate::lattice::LatticePoint;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} has an odd component sum and is not on the even lattice")]
    OddSum(LatticePoint),

    #[error("{what} must be non-negative, got {value}")]
    Negative { what: &'static str, value: i64 },

    #[error("integer overflow while evaluating {0}")]
    Overflow(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("embedded lattice data failed validation: {0}")]
    CorruptData(String),

    #[error("shift {0} is not in the 13-point stencil")]
    ShiftOutsideStencil(LatticePoint),

    #[error("invalid field configuration: {0}")]
    Config(String),

    #[error("equation k={k} at {site} has rank {rank} < 4 (increase tolerance or allow rank deficiency)")]
    RankDeficiency { k: usize, site: LatticePoint, rank: usize },

    #[error("degenerate quadratic form: {0}")]
    Degenerate(String),

    #[error("solution file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
