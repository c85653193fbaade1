use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box {0}")]
    InvalidBox(String),
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("annotation {ann_id} out of bounds: {detail}")]
    Bounds { ann_id: String, detail: String },
    #[error("context variant requested but no non-interactable counterpart annotations exist")]
    MissingCounterparts,
    #[error("cannot form a non-empty {0} fold at this grouping granularity")]
    EmptyFold(String),
    #[error("detection for scene {0} which is not in the evaluated fold")]
    FoldMismatch(String),

    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by {0}")]
    RateLimited(String),
    #[error("replay miss for {endpoint} digest {digest}")]
    ReplayMiss { endpoint: String, digest: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("could not parse {schema} output: {message}")]
    Parse { schema: String, message: String, raw: String },
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("zero-norm embedding vector")]
    ZeroVector,
    #[error("unknown prompt template {0}")]
    UnknownTemplate(String),
    #[error("template {template} is missing slot {slot}")]
    MissingSlot { template: String, slot: String },
    #[error("prompt registry error: {0}")]
    Registry(String),

    #[error("crop error: {0}")]
    Crop(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("ranking has {tp} true positives but only {n_gt} ground truths")]
    InconsistentFlags { tp: usize, n_gt: usize },

    #[error("configuration error: {0}")]
    Config(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Provider,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Provider => 3,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Config(_) | UnknownTemplate(_) | MissingSlot { .. } | Registry(_) => ErrorClass::Usage,
            Transport(_) | RateLimited(_) | ReplayMiss { .. } | Protocol(_) | Parse { .. }
            | DimensionMismatch { .. } | ZeroVector => ErrorClass::Provider,
            _ => ErrorClass::Data,
        }
    }

    /// Transport-level failures worth retrying with backoff.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::RateLimited(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
