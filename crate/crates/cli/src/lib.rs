//! Command-line front end: config ingestion, experiment orchestration and
//! result persistence for the measurement, EPR, CHSH, spectrum and constant
//! calculators.

pub mod config;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] qmeter_core::CoreError),
}

impl CliError {
    /// Process exit code: 2 config, 3 numerical divergence/instability,
    /// 1 anything else. 4 (quality escalation) is decided by the caller.
    pub fn exit_code(&self) -> i32 {
        use qmeter_core::CoreError;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(CoreError::Divergence { .. } | CoreError::StepSize(_)) => 3,
            CliError::Core(
                CoreError::InvalidInput(_)
                | CoreError::Dimension { .. }
                | CoreError::Covariance(_)
                | CoreError::Domain(_),
            ) => 2,
        }
    }
}
