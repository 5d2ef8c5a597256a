use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty reward sequence")]
    EmptyRewards,

    #[error("invalid action: {0:?}")]
    InvalidAction(Vec<f64>),

    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("unknown layout '{0}'")]
    UnknownLayout(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("gradient blow-up")]
    GradientBlowUp,

    #[error("no admissible choice")]
    NoAdmissibleChoice,

    #[error("invalid experience: {0}")]
    InvalidExperience(String),

    #[error("unparseable decomposition")]
    Unparseable,

    #[error("unknown landmark '{0}'")]
    UnknownLandmark(String),

    #[error("no complete decomposition")]
    NoCompleteDecomposition,

    #[error("provider request failed after {attempts} attempt(s): {message}")]
    Provider { attempts: u32, message: String },

    #[error("fixture has no entry for task {0}")]
    FixtureMissing(usize),

    #[error("initiation violated for option {0}")]
    InitiationViolated(usize),

    #[error("option lifecycle: {0}")]
    Lifecycle(String),

    #[error("config: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Transport and auth failures of the HTTP provider may succeed on retry.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Provider { .. })
    }
}
