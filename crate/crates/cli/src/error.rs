use std::fmt;

/// CLI failure, split by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad config, override, parameter or path: exit 2.
    Validation(String),
    /// The numerics failed (integration, steady state, fit): exit 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<catsim::Error> for CliError {
    fn from(e: catsim::Error) -> Self {
        use catsim::Error::*;
        match e {
            TraceDrift { .. } | NegativeEigenvalue { .. } | StepUnderflow { .. } | InvalidState(_) | FitFailed(_)
            | NotHermitian(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}
