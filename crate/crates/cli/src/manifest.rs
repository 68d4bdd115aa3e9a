//! Run manifests: enough to re-execute a command and check its outputs byte for byte.

use std::path::{Path, PathBuf};

use mllab_core::analysis::Estimate;
use mllab_core::clustering::Criterion;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Scenario;
use crate::error::{io_error, CliError};

pub const MANIFEST_FILE: &str = "manifest.json";

/// A command together with its command-specific arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Equilibrium,
    Simulate,
    Panel,
    Estimate { panel: PathBuf, which: Option<Estimate> },
    Cluster { panel: PathBuf, criterion: Criterion, scale_check: bool },
    Figures { panel: PathBuf },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Equilibrium => "equilibrium",
            Invocation::Simulate => "simulate",
            Invocation::Panel => "panel",
            Invocation::Estimate { .. } => "estimate",
            Invocation::Cluster { .. } => "cluster",
            Invocation::Figures { .. } => "figures",
        }
    }

    pub fn input(&self) -> Option<&Path> {
        match self {
            Invocation::Estimate { panel, .. } | Invocation::Cluster { panel, .. } | Invocation::Figures { panel } => Some(panel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub invocation: Invocation,
    pub seed: u64,
    pub config: Scenario,
    pub inputs: Vec<Artifact>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<Artifact>,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
