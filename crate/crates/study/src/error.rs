use thiserror::Error;

pub type Result<T> = std::result::Result<T, StudyError>;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "reference self-consistency failed: n vs n_ref velocity error {reference_error:e} \
         is not below 1/10 of the smallest alpha error {smallest_error:e}"
    )]
    Richardson {
        reference_error: f64,
        smallest_error: f64,
    },

    #[error("every alpha run failed")]
    AllRunsFailed,

    #[error(transparent)]
    Core(#[from] aeul_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl StudyError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        StudyError::Config(msg.into())
    }

    /// 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) => 1,
            StudyError::Core(aeul_core::Error::InvalidParameter(_) | aeul_core::Error::InvalidGrid(_)) => 1,
            _ => 2,
        }
    }
}
