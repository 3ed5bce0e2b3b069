use thiserror::Error;

/// Errors raised by the sampling, estimation, policy and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmisError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("proposal density underflows to zero at sample {index} ({point:?})")]
    ProposalUnderflow { index: usize, point: Vec<f64> },

    #[error("all importance weights are zero")]
    DegenerateWeights,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("no candidates to choose from")]
    NoCandidates,

    #[error("unsupported dimension {0}: only 1-d is supported here")]
    UnsupportedDimension(usize),

    #[error("candidate {index}: {source}")]
    Candidate {
        index: usize,
        #[source]
        source: Box<AmisError>,
    },

    #[error("run {run}, iteration {iteration}: {source}")]
    Run {
        run: usize,
        iteration: usize,
        #[source]
        source: Box<AmisError>,
    },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
}

impl AmisError {
    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        AmisError::MalformedInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        AmisError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, AmisError>;
