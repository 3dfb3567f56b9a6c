use thiserror::Error;

/// Errors raised anywhere in the evidence pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "matrix is not positive definite: leading minor {minor} of {dim} failed (pivot {pivot:e})"
    )]
    NotPositiveDefinite {
        minor: usize,
        dim: usize,
        pivot: f64,
    },

    #[error("invalid parameter for {dist}: {reason}")]
    InvalidParameter { dist: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{estimator} is not available for model {model}")]
    Unsupported {
        estimator: &'static str,
        model: &'static str,
    },

    #[error("Newton iteration did not converge after {iterations} iterations (gradient sup-norm {grad_norm:e})")]
    NewtonDivergence {
        iterations: usize,
        grad_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("hyperparameter mode search failed: {0}")]
    ModeSearch(String),

    #[error("integration grid is empty")]
    EmptyGrid,

    #[error(
        "quadrature did not converge: node-doubling difference {difference:e} exceeds {bound:e}"
    )]
    QuadratureNonConvergence { difference: f64, bound: f64 },

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("{source_name}: missing column `{column}`")]
    MissingColumn { source_name: String, column: String },

    #[error("{source_name}: non-numeric value {value:?} in column `{column}` at data row {row}")]
    NonNumeric {
        source_name: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{source_name}: expected {expected} rows, found {actual}")]
    RowCount {
        source_name: String,
        expected: usize,
        actual: usize,
    },

    #[error("data error in {source_name}: {reason}")]
    Data { source_name: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(dist: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            dist,
            reason: reason.into(),
        }
    }

    pub(crate) fn data(source_name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Data {
            source_name: source_name.into(),
            reason: reason.into(),
        }
    }
}
