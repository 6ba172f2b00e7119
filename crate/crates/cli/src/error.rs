use thiserror::Error;
use trajvault_core::error::ErrorClass;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::User,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Data,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Io,
            message: message.into(),
        }
    }

    /// 1 user error, 2 data error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::User => 1,
            ErrorClass::Data => 2,
            ErrorClass::Io => 3,
        }
    }
}

impl From<trajvault_core::Error> for CliError {
    fn from(e: trajvault_core::Error) -> Self {
        CliError {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(format!("JSON error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
