//! Error taxonomy mapped onto process exit codes.

use thiserror::Error;

/// Exit codes: 0 success, 2 configuration error, 3 incomplete data,
/// 4 simulation failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("incomplete data: {0}")]
    Incomplete(String),
    #[error("simulation failure: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Incomplete(_) => 3,
            CliError::Simulation(_) => 4,
        }
    }
}

impl From<saa_core::EnvError> for CliError {
    fn from(err: saa_core::EnvError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<saa_core::SolverError> for CliError {
    fn from(err: saa_core::SolverError) -> Self {
        use saa_core::SolverError::*;
        match &err {
            BadParams(_) | DimensionMismatch(..) | Env(_) => {
                CliError::Config(err.to_string())
            }
            Simulation { .. } => CliError::Simulation(err.to_string()),
        }
    }
}

impl From<saa_core::EgaError> for CliError {
    fn from(err: saa_core::EgaError) -> Self {
        use saa_core::EgaError::*;
        match &err {
            MissingProfile(_) | NoDeviationsEvaluated(_) | IncompleteClique(_) => {
                CliError::Incomplete(err.to_string())
            }
            Simulation { .. } => CliError::Simulation(err.to_string()),
            Solver(inner) => CliError::from_solver_ref(inner, &err),
            _ => CliError::Config(err.to_string()),
        }
    }
}

impl CliError {
    fn from_solver_ref(inner: &saa_core::SolverError, outer: &saa_core::EgaError) -> Self {
        match inner {
            saa_core::SolverError::Simulation { .. } => {
                CliError::Simulation(outer.to_string())
            }
            _ => CliError::Config(outer.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Simulation(format!("i/o: {err}"))
    }
}
