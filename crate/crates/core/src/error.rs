use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or document violated a precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A computation would exceed a configured size limit.
    #[error("resource limit exceeded: {what} requires {required}, limit is {allowed}")]
    Resource {
        what: &'static str,
        required: u64,
        allowed: u64,
    },

    /// An extrapolation table whose abscissae are too close to separate.
    #[error("ill-conditioned extrapolation table (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
