use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{message}")]
    Validation { field: Option<String>, message: String },
    #[error("{0}")]
    NotFound(String),
    /// The request conflicts with state already recorded (e.g. decision order).
    #[error("{0}")]
    Conflict(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl AppError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Validation { field: Some(field.into()), message: message.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Validation { .. } => "validation",
            AppError::NotFound(_) => "not_found",
            AppError::Conflict(_) => "conflict",
            AppError::Internal(_) => "internal",
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Internal(_) => 1,
            AppError::Validation { .. } => 2,
            AppError::NotFound(_) => 3,
            AppError::Conflict(_) => 4,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: ErrorDetail {
                kind: self.kind(),
                field: match self {
                    AppError::Validation { field, .. } => field.clone(),
                    _ => None,
                },
                message: self.to_string(),
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorDetail {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl From<bop2te::Error> for AppError {
    fn from(e: bop2te::Error) -> Self {
        let field = match &e {
            bop2te::Error::Config { field, .. } => Some(field.clone()),
            _ => None,
        };
        AppError::Validation { field, message: e.to_string() }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            AppError::Internal(e.to_string())
        } else {
            AppError::Validation { field: None, message: format!("malformed JSON: {e}") }
        }
    }
}
