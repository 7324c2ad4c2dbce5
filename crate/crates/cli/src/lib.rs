//! Batch driver for the emissivity prior pipeline.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{run, Command};
pub use config::{Overrides, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] emiprior_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// Short machine-readable tag for the error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(e) => e.kind(),
            Self::Config(_) => "config",
            Self::Pool(_) => "pool",
        }
    }
}

/// The single line written to stderr on failure.
pub fn error_line(e: &CliError) -> String {
    let msg = e
        .to_string()
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n")
        .replace('\r', "\\r");
    format!("error: kind={} msg=\"{}\"", e.kind(), msg)
}
