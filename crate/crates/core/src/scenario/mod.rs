//! Config-driven runs with CSV/JSON artifacts.

mod config;
mod run;

use std::fmt;
use std::path::PathBuf;

pub use config::{
    validate_config, CostSpec, DemographySpec, Diagnostic, EpiSpec, ProfileSpec, RunKind, Scenario, SimulateSpec,
    VaccinateSpec, DEFAULT_A_MAX, DEFAULT_N,
};
pub use run::{build_model, run_scenario, Model, RunOutcome};

use crate::error::Error;

#[derive(Debug)]
pub enum ScenarioError {
    Config(Vec<Diagnostic>),
    Io { path: PathBuf, source: std::io::Error },
    Model { scenario: String, run: RunKind, source: Error },
}

impl ScenarioError {
    /// `2` when the mathematics says no (infeasible, not converged), `1`
    /// for bad input or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Model { source: Error::Infeasible | Error::NotConverged { .. } | Error::NoBracket { .. }, .. } => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Config(diags) => {
                write!(f, "invalid configuration ({} problem{})", diags.len(), if diags.len() == 1 { "" } else { "s" })?;
                for d in diags {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            ScenarioError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            ScenarioError::Model { scenario, run, source } => write!(f, "scenario '{scenario}' (run = {run}): {source}"),
        }
    }
}

impl std::error::Error for ScenarioError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ScenarioError::Io { source, .. } => Some(source),
            ScenarioError::Model { source, .. } => Some(source),
            ScenarioError::Config(_) => None,
        }
    }
}
