//! Front end for `blowup-core`: config parsing, the five verbs and their
//! artifacts.

pub mod config;
pub mod output;
pub mod run;

use config::{ConfigErrors, ConfigIssue};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Core(#[from] blowup_core::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl From<ConfigIssue> for CliError {
    fn from(e: ConfigIssue) -> Self {
        CliError::Config(ConfigErrors(vec![e]))
    }
}

impl CliError {
    /// 1 config or output directory, 2 precondition/domain/classification,
    /// 3 nonconvergence or numerical failure, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        use blowup_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(E::InvalidInput(_) | E::Domain(_) | E::Precondition(_) | E::Classification(_) | E::NonMonotone { .. }) => 2,
            CliError::Core(E::Quadrature(_) | E::Unbracketable { .. } | E::NonConvergence(_)) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
