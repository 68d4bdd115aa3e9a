//! Scenario files: one TOML document with a table per subsystem.

use std::path::Path;

use mllab_core::analysis::{EquilibriumGrid, Group};
use mllab_core::clustering::Criterion;
use mllab_core::dynamics::{Mode, PopulationSpec};
use mllab_core::model::Technology;
use mllab_core::protocol::{ExperimentConfig, SubjectPopulation};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub technology: Technology,
    pub experiment: ExperimentConfig,
    pub population: SubjectPopulation,
    pub equilibrium: EquilibriumGrid,
    pub simulation: SimulationConfig,
    pub clustering: ClusterConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "baseline".into(),
            seed: 42,
            technology: Technology::default(),
            experiment: ExperimentConfig::default(),
            population: SubjectPopulation::default(),
            equilibrium: EquilibriumGrid::default(),
            simulation: SimulationConfig::default(),
            clustering: ClusterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub rounds: u32,
    pub phi_true: f64,
    pub mode: Mode,
    pub population: PopulationSpec,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { rounds: 20, phi_true: 0.5, mode: Mode::Stochastic, population: PopulationSpec::overconfident(10) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClusterGroup {
    All,
    #[default]
    Overconfident,
    Underconfident,
}

impl ClusterGroup {
    pub fn group(self) -> Option<Group> {
        match self {
            ClusterGroup::All => None,
            ClusterGroup::Overconfident => Some(Group::Overconfident),
            ClusterGroup::Underconfident => Some(Group::Underconfident),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Rounds whose (mark, phi) points are stacked.
    pub rounds: Vec<u32>,
    pub group: ClusterGroup,
    pub k_min: usize,
    pub k_max: usize,
    pub criterion: Criterion,
    /// Multiplier applied to the phi coordinate by the scale check.
    pub scale_factor: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            rounds: vec![1, 5],
            group: ClusterGroup::Overconfident,
            k_min: 1,
            k_max: 15,
            criterion: Criterion::Bic,
            scale_factor: 10.0,
        }
    }
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let sc: Scenario = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.technology.validate()?;
        self.experiment.validate()?;
        self.population.validate()?;
        let c = &self.clustering;
        if c.k_min == 0 || c.k_min > c.k_max {
            return Err(CliError::Config(format!("clustering needs 1 <= k_min <= k_max, got {}..{}", c.k_min, c.k_max)));
        }
        if c.rounds.is_empty() {
            return Err(CliError::Config("clustering.rounds must name at least one round".into()));
        }
        if !(c.scale_factor.is_finite() && c.scale_factor != 0.0) {
            return Err(CliError::Config("clustering.scale_factor must be finite and nonzero".into()));
        }
        if self.simulation.rounds == 0 {
            return Err(CliError::Config("simulation.rounds must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}
