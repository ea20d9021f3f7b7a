use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("entry count {found} does not match {rows}x{cols}")]
    EntryCount { rows: usize, cols: usize, found: usize },

    #[error("matrix dimensions must be positive")]
    EmptyMatrix,

    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("factor shape {dims:?} has product {product}, expected {expected}")]
    ShapeMismatch {
        dims: Vec<usize>,
        product: usize,
        expected: usize,
    },

    #[error("invalid factor shape: {0}")]
    InvalidShape(String),

    #[error("factor index {index} out of range for {count} factors")]
    FactorOutOfRange { index: usize, count: usize },

    #[error("partial trace must keep at least one factor")]
    EmptyKeep,

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("state vector norm is not 1 (got {0})")]
    NotNormalized(f64),

    #[error("{name} = {value} outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("expected {expected}, found {found}")]
    WrongKind { expected: String, found: String },

    #[error("map is not isometric (residual {0:e})")]
    NotIsometric(f64),

    #[error("cloner is not isotropic/symmetric: {0}")]
    NonIsotropic(String),

    #[error("no feasible realization after {restarts} restarts (best max residual {best_residual:e})")]
    Infeasible { restarts: usize, best_residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
