//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: expected {expected}, got {got}")]
    DimMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("backward requires a scalar root, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("graph has no differentiable parameters")]
    NoParameters,

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenIdOutOfRange { id: u32, size: usize },

    #[error("locale {0:?} is not registered")]
    UnknownLocale(String),

    #[error("locale id {id} out of range for registry of size {size}")]
    LocaleIdOutOfRange { id: u32, size: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("clicked document type {0:?} maps to no intent")]
    UnmappedClickType(String),

    #[error("empty sequence: {0}")]
    EmptySequence(&'static str),

    #[error("bundle checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("unsupported bundle format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("bundle manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("non-finite gradient in tensor {0:?}")]
    NonFiniteGradient(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
