use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no solvable layout for seed {seed} after {attempts} attempts")]
    LayoutGeneration { seed: u64, attempts: usize },

    #[error("could only produce {produced} distinct layouts of {requested} within {attempts} draws")]
    SuiteExhausted { requested: usize, produced: usize, attempts: usize },

    #[error("goal unreachable from the start pose")]
    Unreachable,

    #[error("episode already finished with status {0:?}")]
    EpisodeFinished(crate::gridworld::Status),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{stage} dataset is single-class: {detail}")]
    SingleClass { stage: &'static str, detail: String },

    #[error("guardrail entry {index} forbids every action")]
    ForbidsAll { index: usize },

    #[error("linear program solver failed: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.to_string(), line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
