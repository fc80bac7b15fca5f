use std::fmt;
use std::path::PathBuf;

use crate::data::ValueKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("column '{column}', record {record}: {message}")]
    Record {
        column: String,
        record: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Invalid(Violations),

    #[error("unknown measure '{name}' for {kind} columns (valid: {})", valid.join(", "))]
    UnknownMeasure {
        kind: ValueKind,
        name: String,
        valid: Vec<&'static str>,
    },

    #[error("unknown value kind '{0}' (valid: numeric, setseq, timeseries, graph, precomputed)")]
    UnknownKind(String),

    #[error("measure '{measure}' expects {expected} values, got {found}")]
    KindMismatch {
        measure: &'static str,
        expected: ValueKind,
        found: ValueKind,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite input")]
    NonFinite,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("precomputed reference {index} outside a {size}x{size} distance matrix")]
    PrecomputedOutOfRange { index: usize, size: usize },

    #[error("precomputed column '{0}' has no distance matrix")]
    MissingMatrix(String),

    #[error("index {index} out of bounds for {len} examples")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model is incompatible with the input: {0}")]
    Incompatible(String),

    #[error("unsupported model version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(column: &str, record: usize, message: impl fmt::Display) -> Self {
        Error::Record {
            column: column.to_string(),
            record,
            message: message.to_string(),
        }
    }
}

/// Every invariant violation found while validating a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Violations(pub Vec<String>);

impl Violations {
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.0.iter().any(|v| v.contains(needle))
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("; "))
    }
}
