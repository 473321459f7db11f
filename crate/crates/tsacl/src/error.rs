use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type. Display output is a single line so the CLI can
/// emit machine-parsable `error: ...` diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("manifest: {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },

    #[error("byte count mismatch: {path}: expected {expected} bytes, found {actual}")]
    ByteCountMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("label out of range: sample {index} has label {label}, valid range is 0..{num_classes}")]
    LabelOutOfRange {
        index: usize,
        label: u32,
        num_classes: u32,
    },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("class count {num_classes} is not divisible by classes_per_task {classes_per_task}")]
    IndivisibleClasses {
        num_classes: usize,
        classes_per_task: usize,
    },

    #[error("channel mismatch: encoder expects {expected} input channels, batch has {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("class {0} already present in the classifier registry")]
    ClassCollision(u32),

    #[error("ensemble members disagree on class registry")]
    RegistryMismatch,

    #[error("empty input in {0}")]
    EmptyInput(String),

    #[error("length mismatch: {context}: {left} vs {right}")]
    LengthMismatch {
        context: String,
        left: usize,
        right: usize,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("accuracy matrix: {0}")]
    AccuracyMatrix(String),

    #[error("checkpoint: bad magic in {0}")]
    BadMagic(PathBuf),

    #[error("checkpoint: version mismatch in {path}: found {found}, expected {expected}")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("checkpoint: checksum failure in {0}")]
    ChecksumMismatch(PathBuf),

    #[error("checkpoint: truncated file {0}")]
    Truncated(PathBuf),

    #[error("json: {path}: {detail}")]
    Json { path: PathBuf, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
