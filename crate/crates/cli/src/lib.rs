//! Command implementations behind the `lrl` binary.
//!
//! Every command validates its whole configuration before touching the file
//! system, writes outputs atomically and maps failures onto exit codes:
//! 0 success, 2 invalid input, 3 numerical failure.

pub mod args;
pub mod closedform;
pub mod config;
pub mod lrl;
pub mod output;
pub mod simulate;
pub mod verify;

use thiserror::Error;

use lrl_core::{AlgebraError, BracketError, ClosedFormError, DynamicsError, LrlError, ModelError};

pub use args::{Cli, Command};
pub use config::{RunConfig, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed or unknown configuration, invalid parameters.
    #[error("invalid input: {0}")]
    Validation(String),
    /// The numerics failed or a verification threshold was missed.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidConfig(_)
            | DynamicsError::ModelUnsupported(_)
            | DynamicsError::Model(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LrlError> for CliError {
    fn from(e: LrlError) -> Self {
        match e {
            LrlError::ModelUnsupported(_) | LrlError::Model(_) => {
                CliError::Validation(e.to_string())
            }
            LrlError::Dynamics(d) => d.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BracketError> for CliError {
    fn from(e: BracketError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::ModelUnsupported(_) | AlgebraError::NonUnitDirection(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ClosedFormError> for CliError {
    fn from(e: ClosedFormError) -> Self {
        match e {
            ClosedFormError::Model(_) | ClosedFormError::UnboundOrInvalid => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate::run(&config::resolve(&a.common, a.to_config())?),
        Command::Lrl(a) => lrl::run(&config::resolve(&a.common, a.to_config())?),
        Command::Verify(a) => verify::run(&config::resolve(&a.common, a.to_config())?),
        Command::Closedform(a) => closedform::run(&config::resolve(&a.common, a.to_config())?),
    }
}
