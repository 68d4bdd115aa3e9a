//! Operator surface for the misguided-learning lab: scenario files, seeded
//! runs with manifests, and the table and figure commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{cmd_cluster, cmd_equilibrium, cmd_estimate, cmd_figures, cmd_panel, cmd_simulate, execute, replay};
pub use config::Scenario;
pub use error::CliError;
pub use manifest::{Invocation, RunManifest};

/// Environment variable that, when set, replaces `--out`.
pub const OUT_ENV: &str = "MLLAB_OUT";
pub const DEFAULT_OUT: &str = "mllab-out";
