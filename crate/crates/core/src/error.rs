use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SvddError>;

#[derive(Debug, Error)]
pub enum SvddError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("row {row} has width {found}, expected {expected}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("label {value} at row {row} is not -1 or +1")]
    InvalidLabel { row: usize, value: i64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("failed to parse {what} at line {line}: {reason}")]
    Parse {
        what: &'static str,
        line: usize,
        reason: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient anomaly rows: need {needed}, have {available}")]
    InsufficientAnomalies { needed: usize, available: usize },

    #[error("cannot stratify batches: {0}")]
    Stratification(String),

    #[error("label sum must be positive, got {0}")]
    DegenerateCenter(i64),

    #[error("layer {layer} has zero norm after the update; projection is undefined")]
    ProjectionUndefined { layer: usize },

    #[error("loss became non-finite at step {step}")]
    Divergence { step: usize },

    #[error("non-finite function value during finite differencing at coordinate {coordinate}")]
    NonFiniteEvaluation { coordinate: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),
}

impl SvddError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        SvddError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that stem from bad inputs rather than from the run itself.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            SvddError::Io { .. } | SvddError::Divergence { .. } | SvddError::ProjectionUndefined { .. }
        )
    }
}
