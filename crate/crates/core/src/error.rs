use thiserror::Error;

pub type Result<T> = std::result::Result<T, DeepError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeepError {
    #[error("invalid network construction: {0}")]
    Construction(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("state diverged at step {step}: non-finite value in neuron {neuron}")]
    Divergence { step: usize, neuron: usize },

    #[error("trajectory too short: need at least {needed} states, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(&'static str),

    #[error("unknown logic operation `{0}` (valid: and, or, xor)")]
    UnknownTask(String),

    #[error("unknown learning rule `{0}` (valid: deep, asym)")]
    UnknownRule(String),

    #[error("invalid hyperparameter: {0}")]
    Hyperparam(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("run with seed {seed} failed at epoch {epoch}, pattern {pattern}: {source}")]
    Training {
        seed: u64,
        epoch: usize,
        pattern: usize,
        #[source]
        source: Box<DeepError>,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl DeepError {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        DeepError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
