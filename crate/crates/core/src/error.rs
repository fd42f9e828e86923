use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("axis {axis} out of range for tensor of rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("spline degree {0} has no derivative basis (degree must be >= 1)")]
    UnsupportedDegree(usize),

    #[error("invalid spline configuration: {0}")]
    InvalidSpline(String),

    #[error("{layer}: backward called before forward")]
    BackwardBeforeForward { layer: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while parsing or locating dataset files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad IDX magic 0x{0:08x} (expected 0x00000801 or 0x00000803)")]
    BadMagic(u32),

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("CIFAR-10 batch length {0} is not a multiple of 3073")]
    CifarLength(usize),

    #[error("invalid label byte {label} at record {index}")]
    InvalidLabel { label: u8, index: usize },

    #[error("subset of {requested} requested from a dataset of {available}")]
    SubsetTooLarge { requested: usize, available: usize },

    #[error("missing data file {path} (run `kanvision fetch {dataset}` first)")]
    MissingFile { path: PathBuf, dataset: String },

    #[error("checksum mismatch for {file}: manifest {expected}, actual {actual}")]
    Checksum {
        file: String,
        expected: String,
        actual: String,
    },

    #[error("malformed manifest line {line}: {text:?}")]
    Manifest { line: usize, text: String },

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
}
