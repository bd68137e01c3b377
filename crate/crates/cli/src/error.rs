use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {artifact}; run `vmsr {run_first}` first")]
    Missing { artifact: String, run_first: &'static str },

    #[error("artifact {artifact} was produced by a different configuration; rerun `vmsr {run_first}`")]
    Stale { artifact: String, run_first: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Core(vmsr_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Missing { .. } | CliError::Stale { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Core(_) => 1,
        })
    }
}

impl From<vmsr_core::Error> for CliError {
    fn from(e: vmsr_core::Error) -> Self {
        match e {
            vmsr_core::Error::Numerical(m) => CliError::Numerical(m),
            other => CliError::Core(other),
        }
    }
}
