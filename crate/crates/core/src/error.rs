use thiserror::Error;

/// Errors raised by the affinv operations.
///
/// Variant names mirror the failure modes callers are expected to branch on;
/// the CLI prints [`Error::name`] on standard error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("derivative order {requested} exceeds jet order {available}")]
    OrderExceeded { requested: usize, available: usize },
    #[error("tensor would need {entries} entries, cap is {cap}")]
    SizeCapExceeded { entries: u128, cap: usize },
    #[error("matrix is not unimodular (det = {0})")]
    NotUnimodular(f64),
    #[error("objective is not finite ({0})")]
    NonFiniteObjective(f64),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("invalid shape: {0}")]
    ShapeInvalid(String),
    #[error("point set is empty")]
    EmptySet,
    #[error("degenerate body: {0}")]
    DegenerateBody(String),
    #[error("average norm is degenerate on this sample set (rank {rank} < {dim})")]
    DegenerateNorm { rank: usize, dim: usize },
    #[error("no index tuple has positive mass in its wedge region")]
    EmptyVBeta,
    #[error("field frame undefined at sample {0}")]
    UndefinedAtPoint(usize),
    #[error("polynomial is not homogeneous of degree {0}")]
    NotHomogeneous(usize),
    #[error("no admissible collection of size {m}: {reason}")]
    InfeasibleM { m: usize, reason: String },
    #[error("pullback of the body is empty")]
    EmptyPullback,
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// Stable kebab-case identifier for the error kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::OrderExceeded { .. } => "order-exceeded",
            Error::SizeCapExceeded { .. } => "size-cap-exceeded",
            Error::NotUnimodular(_) => "not-unimodular",
            Error::NonFiniteObjective(_) => "non-finite-objective",
            Error::NotSymmetric => "not-symmetric",
            Error::ShapeInvalid(_) => "shape-invalid",
            Error::EmptySet => "empty-set",
            Error::DegenerateBody(_) => "degenerate-body",
            Error::DegenerateNorm { .. } => "degenerate-norm",
            Error::EmptyVBeta => "empty-V-beta",
            Error::UndefinedAtPoint(_) => "undefined-at-point",
            Error::NotHomogeneous(_) => "not-homogeneous",
            Error::InfeasibleM { .. } => "infeasible-m",
            Error::EmptyPullback => "empty-pullback",
            Error::Parse { .. } => "parse-error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
