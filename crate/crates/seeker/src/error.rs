use thiserror::Error;

/// Errors produced by the environment, the networks, and the harness.
#[derive(Debug, Error)]
pub enum SeekerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid has no empty cell left")]
    NoEmptyCell,

    #[error("no solvable map found after {attempts} attempts")]
    GenerationFailure { attempts: usize },

    #[error("map parse error at line {line}, column {col}: {msg}")]
    MapParse {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("invalid action index {0} (valid: 0..=4)")]
    InvalidAction(usize),

    #[error("episode already finished; call reset before stepping again")]
    EpisodeFinished,

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint version: {0}")]
    UnsupportedVersion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SeekerError>;
