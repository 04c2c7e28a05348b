//! Batch driver for the revolve laboratory: one subcommand per experiment,
//! JSON in, JSON/CSV out, plus a `manifest.json` for every run.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use revolve_core::RevolveError;
use serde_json::{json, Value};
use thiserror::Error;

pub use commands::{run, RunOptions};
pub use config::{ExperimentConfig, Mode};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] RevolveError),
}

impl CliError {
    /// 2 for bad input, 3 when no diffusion limit exists, 4 when a resource
    /// budget ran out, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Core(RevolveError::Solvability { .. }) => 3,
            CliError::Core(RevolveError::ResourceExhausted { .. }) => 4,
            CliError::Core(
                RevolveError::InvalidConfig { .. }
                | RevolveError::InvalidDimension(_)
                | RevolveError::DimensionMismatch { .. }
                | RevolveError::InvalidAngles(_),
            ) => 2,
            CliError::Core(RevolveError::Domain(_)) | CliError::Io { .. } => 1,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> Value {
        let mut body = json!({
            "error": match self {
                CliError::Schema { .. } | CliError::Core(RevolveError::InvalidConfig { .. }) => "schema",
                CliError::Io { .. } => "io",
                CliError::Core(RevolveError::Solvability { .. }) => "balance",
                CliError::Core(RevolveError::ResourceExhausted { .. }) => "resource_exhausted",
                CliError::Core(_) => "domain",
            },
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Schema { field, .. } | CliError::Core(RevolveError::InvalidConfig { field, .. }) => {
                body["field"] = json!(field);
            }
            CliError::Core(RevolveError::Solvability { residual, norm }) => {
                body["residual"] = json!(residual);
                body["residual_norm"] = json!(norm);
            }
            CliError::Core(RevolveError::ResourceExhausted { completed, requested, .. }) => {
                body["completed"] = json!(completed);
                body["requested"] = json!(requested);
            }
            _ => {}
        }
        body
    }
}
