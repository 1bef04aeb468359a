use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("body frame of agent {agent} is rank deficient")]
    DegenerateFrame { agent: usize },

    #[error("frequencies are not pairwise distinct: {0}")]
    FrequencyCollision(String),

    #[error("realization is not a target formation: psi = {psi:e}")]
    NotARealization { psi: f64 },

    #[error("step size {dt} exceeds the limit {limit} set by the fastest dither period")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("state became non-finite at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64, last_finite: Vec<f64> },

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario { path: path.into(), message: message.into() }
    }
}
