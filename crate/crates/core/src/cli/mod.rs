//! Recipe-driven front end: configuration parsing, experiment execution and
//! CSV output.
//!
//! Output files start with `#` metadata lines (tool version and the full
//! effective configuration, which is itself a valid recipe), followed by a
//! fixed header and rows sorted by `(κ, Q, S, combiner)`. Numbers are written
//! in shortest round-trip form, so identical inputs give byte-identical files.

pub mod config;
mod run;

pub use config::{parse_config, parse_config_with_overrides, ExperimentKind, ExperimentRecipe, Location};
pub use run::{render_csv, run_recipe, write_output, CORRELATION_HEADER, CONDITION_HEADER, SE_SWEEP_HEADER};

use thiserror::Error;

/// Front-end failures, each mapped to a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {message}", location.map(|l| format!(" at {l}")).unwrap_or_default())]
    Config {
        location: Option<Location>,
        message: String,
    },

    #[error("simulation error: {0}")]
    Simulation(#[from] crate::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn config(location: Location, message: impl Into<String>) -> Self {
        CliError::Config {
            location: Some(location),
            message: message.into(),
        }
    }

    /// 0 success, 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Simulation(crate::Error::Config(_) | crate::Error::SplitMismatch { .. }) => 2,
            CliError::Simulation(_) | CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}
