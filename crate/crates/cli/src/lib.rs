//! Batch front-end for the graphflow laboratory: experiment configuration,
//! runs, verification suites and decay fits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{
    cmd_fit, cmd_rescale_check, cmd_run, cmd_verify, run_suite, RunSummary, Suite, SuiteReport,
};
pub use config::RunConfig;

use graphflow_core::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A verification suite or decay claim failed.
    pub const CHECK_FAILED: u8 = 1;
    pub const BLOW_UP: u8 = 2;
    pub const INVARIANT: u8 = 3;
    /// Unreadable or malformed input (config, CSV, snapshot).
    pub const MALFORMED: u8 = 4;
}

/// A command failure with the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(exit::MALFORMED, message)
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        Self::new(exit::CHECK_FAILED, message)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BlowUp { .. } => exit::BLOW_UP,
            Error::OutsideAreaDecreasing(_)
            | Error::InvariantViolation { .. }
            | Error::GeometryInconsistency { .. }
            | Error::CorruptField { .. } => exit::INVARIANT,
            Error::Malformed { .. } | Error::Csv(_) | Error::Io(_) | Error::InvalidGrid(_) => {
                exit::MALFORMED
            }
            Error::InvalidArgument(_)
            | Error::InsufficientHorizon(_)
            | Error::UnsupportedOrder(_) => exit::CHECK_FAILED,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}
