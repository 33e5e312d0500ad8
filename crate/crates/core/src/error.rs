use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FindrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FindrError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate vector: zero L2 norm")]
    DegenerateVector,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("cannot ingest image {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("request rejected with HTTP {status}: {body}")]
    Request { status: u16, body: String },

    #[error("provider contract violated: {0}")]
    ProviderContract(String),

    #[error("cannot parse model output: {0}")]
    Parse(String),

    #[error("vocabulary is empty after filtering; inspect candidates.jsonl for the raw predictions")]
    EmptyVocabulary,

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("missing upstream artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("run directory {} is locked by another invocation", .0.display())]
    Locked(PathBuf),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FindrError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FindrError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line driver.
    ///
    /// 2 usage/validation, 3 empty vocabulary, 4 provider/transport, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            FindrError::Contract(_)
            | FindrError::Config(_)
            | FindrError::Validation(_)
            | FindrError::Ingestion { .. }
            | FindrError::MissingArtifact(_)
            | FindrError::Locked(_)
            | FindrError::EmptyInput(_)
            | FindrError::Evaluation(_) => 2,
            FindrError::EmptyVocabulary => 3,
            FindrError::Transport(_)
            | FindrError::Request { .. }
            | FindrError::ProviderContract(_)
            | FindrError::Parse(_) => 4,
            FindrError::DegenerateVector | FindrError::Io { .. } | FindrError::Json(_) => 1,
        }
    }
}
