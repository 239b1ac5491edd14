//! Crate-wide error type.

use thiserror::Error;

/// Every fallible operation in this crate returns [`Error`].
#[derive(Debug, Error)]
pub enum Error {
    // ---- data ingestion ----
    #[error("malformed CSV header: expected `{expected}`, got `{got}`")]
    Format { expected: String, got: String },
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
    #[error("duplicate date {date} in series `{asset}`")]
    DuplicateDate { asset: String, date: chrono::NaiveDate },
    #[error("no overlapping dates between `{left}` and `{right}` in the requested window")]
    EmptyPanel { left: String, right: String },

    // ---- feature engineering ----
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("column `{column}` has zero variance on the fit window")]
    DegenerateColumn { column: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    // ---- numerics ----
    #[error("need at least 2 rows, got {0}")]
    InsufficientRows(usize),
    #[error("matrix is not symmetric within tolerance (max asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not positive definite (pivot {pivot}){hint}")]
    NotPositiveDefinite { pivot: usize, hint: String },
    #[error("singular triangular system (zero diagonal at {0})")]
    Singular(usize),
    #[error("column/name alignment mismatch: {0}")]
    Alignment(String),
    #[error("undefined entry: {0}")]
    UndefinedEntry(String),
    #[error("p-block wider than x-block ({p} > {q}); swap the blocks")]
    Orientation { p: usize, q: usize },

    // ---- pipeline ----
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("out-of-sample window produced no usable rows")]
    EmptyWindow,
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or unreadable config file (exit 1).
    Config,
    /// Bad or insufficient input data (exit 2).
    Data,
    /// Numerical failure (exit 3).
    Numeric,
}

impl Error {
    /// Tag an error with the pipeline stage it surfaced in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Format { .. }
            | Error::Row { .. }
            | Error::DuplicateDate { .. }
            | Error::EmptyPanel { .. }
            | Error::Domain(_)
            | Error::Shape(_)
            | Error::DegenerateColumn { .. }
            | Error::InsufficientData(_)
            | Error::EmptyWindow
            | Error::Io { .. } => ErrorClass::Data,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
