use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("attention sequence {sequence} has no valid position")]
    EmptyAttention { sequence: usize },
    #[error("no labeled faces")]
    NoLabels,
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("mesh has no texture image")]
    MissingTexture,
    #[error("face {face} has no valid texture pixel")]
    EmptyPatch { face: usize },
    #[error("index {index} out of range ({len})")]
    OutOfRange { index: usize, len: usize },
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
