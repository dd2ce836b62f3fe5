//! Command-line front end: config loading, subcommands and file outputs.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    /// The population is not viable (`b <= mu`), so there is no
    /// demographic equilibrium to work around.
    #[error("extinction regime: {0}")]
    Regime(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0} diagnostic(s) failed")]
    DiagnosticsFailed(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Regime(_) => 2,
            CliError::Numerical(_) | CliError::DiagnosticsFailed(_) => 3,
        }
    }
}

impl From<netage::Error> for CliError {
    fn from(e: netage::Error) -> Self {
        match e {
            netage::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            netage::Error::InvalidUsage(m) => CliError::Usage(m),
            netage::Error::NumericalFailure(_) | netage::Error::DiagnosticUnavailable(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
