//! Command implementations behind the `hgo-gp` binary.
//!
//! Each command returns `Ok(())` or a [`CliError`] carrying the process exit
//! code, so the binary only has to print and exit.

pub mod manifest;
pub mod plot;
pub mod run;
pub mod trace_io;
pub mod verify;

use std::fmt;

pub use manifest::RunManifest;
pub use plot::cmd_plot;
pub use run::cmd_run;
pub use verify::{cmd_verify, VerifySettings};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// A check failed or an I/O operation went wrong.
    Failure = 1,
    /// The input (config file or trace) was rejected.
    InvalidInput = 2,
    /// The simulation diverged; the partial trace was written.
    Divergence = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self::new(ExitStatus::Failure, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ExitStatus::InvalidInput, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
