//! Std companion for `hoverkit-core`: configuration files, trace and report
//! emission, Monte-Carlo sweeps and endurance tables.

pub mod config;
pub mod report;
pub mod sweep;
pub mod trace;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hoverkit_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Core(hoverkit_core::Error::InvalidConfig(_)) => 3,
            _ => 1,
        }
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;
