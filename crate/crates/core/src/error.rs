use thiserror::Error;

use crate::model::Violation;
use crate::simulate::Coupling;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("{what} is not positive semidefinite (eigenvalue {eigenvalue:e}, tolerance {tolerance:e})")]
    NotPsd {
        what: String,
        eigenvalue: f64,
        tolerance: f64,
    },

    #[error("{what} is singular or not positive definite")]
    Singular { what: String },

    #[error("affinity matrix has rank {rank}, expected {expected}")]
    RankDeficientAffinity { rank: usize, expected: usize },

    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("model has no surplus split (B, Gamma, sigma1, sigma2)")]
    MissingSplit,

    #[error("sample conditional covariance of Y given X is not positive definite")]
    DegenerateConditional,

    #[error("too few observations: {n_obs} (need at least {required})")]
    TooFewObservations { n_obs: usize, required: usize },

    #[error("cross-covariance is rank deficient; closed-form derivative unavailable")]
    SingularCross,

    #[error("transfer regression features are collinear (smallest singular value {smallest:e})")]
    CollinearFeatures { smallest: f64 },

    #[error("sample carries no transfer observations")]
    NoTransfers,

    #[error("discretized oracle supports dimensions up to 2, got m = {m}, n = {n}")]
    DimensionTooLarge { m: usize, n: usize },

    #[error("IPFP did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        best: Box<Coupling>,
    },

    #[error("function evaluation failed at perturbation {index}: {source}")]
    EvaluationFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("sample header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("non-numeric cell at row {row}, column {col}: {value:?}")]
    NonNumericCell { row: usize, col: usize, value: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI result documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "DIMENSION_MISMATCH",
            Error::NotPsd { .. } => "NOT_PSD",
            Error::Singular { .. } => "SINGULAR",
            Error::RankDeficientAffinity { .. } => "RANK_DEFICIENT_AFFINITY",
            Error::InvalidModel(_) => "INVALID_MODEL",
            Error::MissingSplit => "MISSING_SPLIT",
            Error::DegenerateConditional => "DEGENERATE_CONDITIONAL",
            Error::TooFewObservations { .. } => "TOO_FEW_OBSERVATIONS",
            Error::SingularCross => "SINGULAR_CROSS",
            Error::CollinearFeatures { .. } => "COLLINEAR_FEATURES",
            Error::NoTransfers => "NO_TRANSFERS",
            Error::DimensionTooLarge { .. } => "DIMENSION_TOO_LARGE",
            Error::MaxIterExceeded { .. } => "MAX_ITER_EXCEEDED",
            Error::EvaluationFailed { .. } => "EVALUATION_FAILED",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Validation(_) => "VALIDATION_ERROR",
            Error::HeaderMismatch(_) => "HEADER_MISMATCH",
            Error::NonNumericCell { .. } => "NON_NUMERIC_CELL",
            Error::Io(_) => "IO_ERROR",
        }
    }

    /// True for errors caused by how the tool was invoked rather than by the numbers.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::HeaderMismatch(_)
                | Error::NonNumericCell { .. }
                | Error::Io(_)
        )
    }

    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn singular(what: impl Into<String>) -> Self {
        Error::Singular { what: what.into() }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
