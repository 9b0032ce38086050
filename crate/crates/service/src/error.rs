use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store layout: {0}")]
    Layout(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("corrupt log {path}: line {line}: {reason}")]
    CorruptLog { path: String, line: usize, reason: String },

    #[error(transparent)]
    Core(#[from] hls_lab_core::HlsError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;
