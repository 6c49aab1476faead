//! Library half of the command-line front end: configuration parsing,
//! presets, and result output, kept separate from `main` so they can be
//! tested directly.

pub mod config;
pub mod output;
pub mod presets;
pub mod svg;

/// CLI-facing error with its exit code: 1 for usage/config problems, 2 for
/// numerical or I/O failures.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            exit_code: 1,
            message: message.into(),
        }
    }

    pub fn numerical(err: impl std::fmt::Display) -> Self {
        CliError {
            exit_code: 2,
            message: err.to_string(),
        }
    }

    pub fn io(err: std::io::Error) -> Self {
        CliError {
            exit_code: 2,
            message: format!("I/O error: {err}"),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<config::ConfigError> for CliError {
    fn from(err: config::ConfigError) -> Self {
        CliError::usage(format!("configuration error: {err}"))
    }
}
