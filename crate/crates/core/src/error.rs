use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("file {0} has no header or no data rows")]
    EmptyFile(PathBuf),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("degenerate split: fraction {fraction} of {n} rows leaves an empty side")]
    DegenerateSplit { fraction: f64, n: usize },
    #[error("synthetic generator needs at least 8 features, got {0}")]
    TooFewFeatures(usize),
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("feature index {index} out of range for dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("schema mismatch: expected columns {expected:?}, found {found:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no coverage-eligible rule with at least two rows; supply the noise variance explicitly")]
    NoVarianceEstimate,
    #[error("no significant or insignificant rule available for selection")]
    NothingToSelect,
    #[error("no training row falls inside the covering")]
    EmptyUnion,
    #[error("target has zero variance")]
    ZeroVariance,
    #[error("too many rules for brute-force enumeration: {0} (max {1})")]
    TooManyRules(usize, usize),
    #[error("invalid signature `{0}`")]
    InvalidSignature(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by malformed input files or arguments, as opposed to
    /// failures inside the fitting pipeline.
    pub fn is_input_error(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_input_error();
        }
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::EmptyFile(_)
                | Error::MissingColumn(_)
                | Error::DuplicateColumn(_)
                | Error::NonNumeric { .. }
                | Error::RaggedRow { .. }
                | Error::InvalidDataset(_)
                | Error::DimensionMismatch { .. }
                | Error::SchemaMismatch { .. }
                | Error::UnknownFeature(_)
                | Error::InvalidConfig(_)
                | Error::InvalidSignature(_)
                | Error::DegenerateSplit { .. }
                | Error::TooFewFeatures(_)
        )
    }
}
