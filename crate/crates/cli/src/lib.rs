//! Library surface of the experiment harness: configuration, commands and
//! report writers. The `sparpde` binary is a thin wrapper over this.

pub mod commands;
pub mod config;
pub mod report;

/// Errors surfaced to the CLI, split by exit code: configuration and
/// validation problems exit 2, failed `--check` tolerances exit 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sparpde::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("report serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}
