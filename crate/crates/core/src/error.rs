use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("invalid measurement setting: {0}")]
    BadSetting(String),
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("vertex count {0} exceeds the enumeration cap")]
    Overflow(u128),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("Eve alphabet of size {0} exceeds the supported maximum")]
    AlphabetTooLarge(usize),
    #[error("curve parameter grids differ")]
    GridMismatch,
    #[error("no CHSH violation: omega* = {0:.6} < 2")]
    NoViolation(f64),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
