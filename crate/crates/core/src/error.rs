use thiserror::Error;

#[derive(Debug, Error)]
pub enum HlsError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown condition '{0}'")]
    UnknownCondition(String),

    #[error("incomplete responses: unanswered trials {missing:?}")]
    Incomplete { missing: Vec<usize> },

    #[error("condition processing failed: {}", format_failures(.0))]
    ConditionFailures(Vec<(String, String)>),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn format_failures(failures: &[(String, String)]) -> String {
    failures
        .iter()
        .map(|(label, msg)| format!("{label}: {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = HlsError> = std::result::Result<T, E>;
