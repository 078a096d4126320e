//! Command-line tooling, file formats and parallel drivers for `hdqkd-core`.

pub mod cli;
pub mod config;
pub mod decoy_lp;
pub mod parallel;
pub mod sweep;
pub mod timeline_io;
pub mod validate;

pub use config::RunConfig;

/// Errors surfaced by the command-line layer, each mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    /// Malformed input file.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Computation(String),
    #[error("invariant failed: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] hdqkd_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    /// 2 for usage and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Input(_) => 2,
            _ => 1,
        }
    }
}
