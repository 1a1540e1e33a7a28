use std::path::PathBuf;

/// Errors produced by the navigation stack, learner and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("pose ({x:.3}, {y:.3}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("no path from start to goal")]
    NoPath,

    #[error("goal coincides with the robot position; progress direction undefined")]
    DegenerateGoalDirection,

    #[error("environment generation failed after {retries} retries (seed {seed})")]
    DegenerateWorld { seed: u64, retries: u32 },

    #[error("episode already finished; call reset first")]
    EpisodeDone,

    #[error("environment has not been reset")]
    NotReset,

    #[error("replay buffer holds {size} transitions, cannot sample {requested}")]
    BufferUnderflow { size: usize, requested: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("forward cache is stale (network changed since the forward pass)")]
    StaleCache,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("report inputs mismatch: {0}")]
    Mismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.into(),
        }
    }
}
