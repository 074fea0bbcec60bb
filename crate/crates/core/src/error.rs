use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("simulation produced a non-finite state on path {path} at step {step}")]
    Simulation { path: usize, step: usize },

    #[error("training failed at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("gradient contract violated: {0}")]
    Contract(String),

    #[error("all {runs} runs failed; last failure: {last}")]
    Solve { runs: usize, last: String },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
