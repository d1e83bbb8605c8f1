//! Failure classes shared by the CLI (exit codes) and the API (HTTP status).

use std::path::{Path, PathBuf};

use axum::http::StatusCode;
use dynassure_core::ingest::IngestError;
use dynassure_core::riskdyn::RiskDynError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("computation failed: {0}")]
    Computation(String),
}

impl ServiceError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, message: impl ToString) -> Self {
        Self::Parse {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }

    /// Short machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::Validation(_) => "validation",
            Self::BadRequest(_) => "badRequest",
            Self::NotFound(_) => "notFound",
            Self::Conflict(_) => "conflict",
            Self::Computation(_) => "computation",
        }
    }

    /// Process exit status for the CLI. `1` is reserved for checks that ran
    /// but did not pass; `2` is used by the argument parser.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse { .. } | Self::BadRequest(_) => 3,
            Self::Validation(_) => 4,
            Self::Io { .. } => 5,
            Self::Conflict(_) => 6,
            Self::NotFound(_) => 7,
            Self::Computation(_) => 8,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::Parse { .. } | Self::BadRequest(_) | Self::Validation(_) => StatusCode::BAD_REQUEST,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::Conflict(_) => StatusCode::CONFLICT,
            Self::Io { .. } | Self::Computation(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<IngestError> for ServiceError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::TimestampRegression { .. } | IngestError::DuplicateRun(_) => Self::Conflict(e.to_string()),
            IngestError::Io(source) => Self::Io {
                path: PathBuf::from("run log"),
                source,
            },
            IngestError::CorruptLog { .. } => Self::parse("run log", e),
            IngestError::Malformed { .. } | IngestError::UnknownMeasure(_) | IngestError::NonFinite { .. } => {
                Self::BadRequest(e.to_string())
            }
        }
    }
}

impl From<RiskDynError> for ServiceError {
    fn from(e: RiskDynError) -> Self {
        match e {
            RiskDynError::UnknownElement(_) => Self::NotFound(e.to_string()),
            RiskDynError::ValueOutOfRange { .. } => Self::BadRequest(e.to_string()),
            _ => Self::Computation(e.to_string()),
        }
    }
}
