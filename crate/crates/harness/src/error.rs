use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("could not parse config: {0}")]
    Parse(String),

    #[error("lengths differ: {left} estimates vs {right} truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least one value")]
    Empty,

    #[error(transparent)]
    Model(#[from] simcmc::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        HarnessError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
