//! Experiment configuration files. Every command reads a JSON document
//! with a `schema_version`, an environment (inline or a file path), and
//! command-specific sections. The master seed comes from the environment
//! unless `--seed` overrides it.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use saa_core::ega::{RosterBuildParams, StrategyRoster};
use saa_core::{EnvironmentSpec, ScSolverParams, StrategySpec};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum EnvRef {
    Path(String),
    Inline(EnvironmentSpec),
}

impl EnvRef {
    pub fn resolve(&self, base: &Path) -> Result<EnvironmentSpec, CliError> {
        let spec = match self {
            EnvRef::Inline(spec) => spec.clone(),
            EnvRef::Path(path) => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    CliError::Config(format!("environment file {}: {e}", full.display()))
                })?;
                EnvironmentSpec::from_json(&text)?
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Deserialize)]
pub struct RosterEntryConfig {
    pub label: String,
    pub strategy: StrategySpec,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum RosterConfig {
    /// Path to a roster JSON file (`{"strategies": [...]}`).
    Path(String),
    /// The built-in roster derived from the environment itself.
    Builtin {
        builtin: String,
        #[serde(default)]
        sb_samples: Option<u64>,
        #[serde(default)]
        solver: Option<ScSolverParams>,
    },
    Inline {
        strategies: Vec<RosterEntryConfig>,
    },
}

#[derive(Debug, Deserialize)]
struct RosterFile {
    strategies: Vec<RosterEntryConfig>,
}

pub enum ResolvedRoster {
    Fixed(StrategyRoster),
    /// Must be derived from the environment with these parameters.
    Builtin(RosterBuildParams),
}

impl RosterConfig {
    pub fn resolve(&self, base: &Path) -> Result<ResolvedRoster, CliError> {
        match self {
            RosterConfig::Path(path) => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    CliError::Config(format!("roster file {}: {e}", full.display()))
                })?;
                let file: RosterFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("roster file: {e}")))?;
                let roster = StrategyRoster::new(
                    file.strategies.into_iter().map(|e| (e.label, e.strategy)).collect(),
                )?;
                Ok(ResolvedRoster::Fixed(roster))
            }
            RosterConfig::Builtin { builtin, sb_samples, solver } => {
                if builtin != "default" {
                    return Err(CliError::Config(format!(
                        "unknown builtin roster {builtin:?} (only \"default\")"
                    )));
                }
                let mut params = RosterBuildParams::default();
                if let Some(n) = sb_samples {
                    params.sb_samples = *n;
                }
                if let Some(s) = solver {
                    params.solver = s.clone();
                }
                Ok(ResolvedRoster::Builtin(params))
            }
            RosterConfig::Inline { strategies } => {
                let roster = StrategyRoster::new(
                    strategies
                        .iter()
                        .map(|e| (e.label.clone(), e.strategy.clone()))
                        .collect(),
                )?;
                Ok(ResolvedRoster::Fixed(roster))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct DeriveScConfig {
    pub environment: EnvRef,
    #[serde(default)]
    pub solver: Option<ScSolverParams>,
}

#[derive(Debug, Deserialize)]
pub struct SimulateProfileConfig {
    pub environment: EnvRef,
    pub roster: RosterConfig,
    /// Strategy label -> number of agents playing it.
    pub profile: std::collections::BTreeMap<String, usize>,
    pub games: u64,
}

#[derive(Debug, Deserialize)]
pub struct ReplicatorConfig {
    #[serde(default = "default_replicator_steps")]
    pub steps: usize,
    #[serde(default = "default_replicator_tol")]
    pub tol: f64,
}

fn default_replicator_steps() -> usize {
    100_000
}

fn default_replicator_tol() -> f64 {
    1e-10
}

impl Default for ReplicatorConfig {
    fn default() -> Self {
        ReplicatorConfig {
            steps: default_replicator_steps(),
            tol: default_replicator_tol(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct AnalyzeGameConfig {
    pub environment: EnvRef,
    pub roster: RosterConfig,
    /// Previously estimated payoff tables to load.
    #[serde(default)]
    pub payoff_tables: Vec<String>,
    /// Simulation budget for profiles not covered by the tables.
    #[serde(default)]
    pub games: Option<u64>,
    /// The strategy whose all-candidate profile is checked.
    pub candidate: String,
    /// Cliques (by label) for dominance and replicator analysis.
    #[serde(default)]
    pub cliques: Vec<Vec<String>>,
    #[serde(default = "default_bootstrap_resamples")]
    pub bootstrap_resamples: u64,
    #[serde(default)]
    pub replicator: ReplicatorConfig,
}

fn default_bootstrap_resamples() -> u64 {
    10_000
}

pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, PathBuf), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    if version != Some(u64::from(SCHEMA_VERSION)) {
        return Err(CliError::Config(format!(
            "config {}: schema_version must be {SCHEMA_VERSION}",
            path.display()
        )));
    }
    let parsed: T = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok((parsed, base))
}
