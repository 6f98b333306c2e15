use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing label column {0:?}")]
    MissingLabelColumn(String),
    #[error("invalid label {value:?} at row {row}")]
    InvalidLabel { row: usize, value: String },
    #[error("missing label at row {0}")]
    MissingLabel(usize),
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("column {column:?} has a non-numeric value {value:?}")]
    NotNumeric { column: String, value: String },
    #[error("column {0:?} has no observed values")]
    EmptyColumn(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("no columns survive preprocessing")]
    NoColumns,
    #[error("empty data")]
    EmptyData,
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("duplicate assignment of feature {0}")]
    DuplicateAssignment(String),
    #[error("uncovered column {0}")]
    UncoveredColumn(String),
    #[error("invalid group partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("non-finite objective at iteration {0}")]
    NonFiniteObjective(usize),
    #[error("line search failed to find a step at iteration {0}")]
    LineSearchFailed(usize),
    #[error("bootstrap could not draw a two-class resample after {0} attempts")]
    DegenerateResample(usize),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::NonFiniteObjective(_)
            | Error::LineSearchFailed(_)
            | Error::DegenerateResample(_) => ErrorKind::Numerical,
            Error::Fold { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}
