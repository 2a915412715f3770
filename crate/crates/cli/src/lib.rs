//! Library side of the `vcl-lab` executable: configuration schemas, the
//! analysis routines behind each subcommand, and report writing. The binary
//! in `main.rs` is a thin dispatcher over [`commands`].

pub mod analysis;
pub mod commands;
pub mod config;
pub mod report;

/// How a command run ended. Configuration and usage problems are raised as
/// [`CmdError::Config`] (exit code 2); failed checks and runtime aborts
/// surface as exit code 1.
#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Run(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(msg) => write!(f, "config error: {msg}"),
            CmdError::Run(msg) => write!(f, "run error: {msg}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<vcl_core::CoreError> for CmdError {
    fn from(err: vcl_core::CoreError) -> Self {
        match err {
            vcl_core::CoreError::Config(_) | vcl_core::CoreError::InvalidArgument(_) => {
                CmdError::Config(err.to_string())
            }
            other => CmdError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(err: std::io::Error) -> Self {
        CmdError::Run(format!("i/o: {err}"))
    }
}

/// `Ok(true)` means every enabled check passed.
pub type CmdResult = Result<bool, CmdError>;
