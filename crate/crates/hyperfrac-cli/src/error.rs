use thiserror::Error;

/// Exit status of a run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EXPERIMENT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema violation or unsupported setting.
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical failure inside the library.
    #[error("experiment failed: {0}")]
    Numerical(#[from] hyperfrac::Error),
    /// One or more declared tolerances were not met; the summary was written.
    #[error("{0} tolerance check(s) failed; see summary.json")]
    Checks(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Checks(_) => EXIT_EXPERIMENT,
        }
    }
}
