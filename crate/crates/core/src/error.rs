use thiserror::Error;

/// Errors raised by the prediction library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: require a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("quadrature order {0} out of range 1..=64")]
    QuadratureOrder(usize),

    #[error("matrix is not positive definite (degenerate design, e.g. duplicate sites)")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric: max asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("derivative order {requested} exceeds kernel smoothness {smoothness}")]
    DerivativeOrder { requested: u8, smoothness: u8 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid trend: {0}")]
    InvalidTrend(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("measure supports differ: [{0}, {1}] vs [{2}, {3}]")]
    SupportMismatch(f64, f64, f64, f64),

    #[error("negative mean squared error {0:e} (inconsistent inputs)")]
    NegativeMse(f64),

    #[error("residual check failed: {0}")]
    ResidualCheck(String),

    #[error("predictor is biased: unbiasedness gap {0:?}")]
    Biased(Vec<f64>),

    #[error("no derivative callable supplied for component {0}")]
    MissingDerivative(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
