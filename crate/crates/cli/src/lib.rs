//! Command-line front end for the mixed-state quench toolkit: TOML
//! experiment configs, a preset catalogue, deterministic CSV/JSON output,
//! and grid-refinement classification of rate-function non-analyticities.

pub mod config;
pub mod presets;
pub mod refine;
pub mod runner;
pub mod table;

/// Top-level failure of a CLI invocation, carrying its process exit code:
/// configuration and I/O problems exit 2, violated numerical contracts
/// (named by the wrapped error) exit 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("numerical contract violation: {0}")]
    Numerical(#[from] gloa_core::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
