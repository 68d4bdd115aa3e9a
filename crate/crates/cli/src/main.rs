use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mllab_cli::commands::{execute, replay};
use mllab_cli::manifest::{Invocation, RunManifest};
use mllab_cli::{CliError, Scenario, DEFAULT_OUT, OUT_ENV};
use mllab_core::analysis::Estimate;
use mllab_core::clustering::Criterion;

#[derive(Parser, Debug)]
#[command(
    name = "mllab",
    version,
    about = "Misguided learning: equilibria, simulations, synthetic experiments and their econometrics"
)]
struct Cli {
    /// Scenario file (TOML); defaults apply to anything it leaves out.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the scenario's seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (the MLLAB_OUT environment variable takes precedence).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the equilibrium grid and write equilibrium.csv.
    Equilibrium,
    /// Simulate belief paths; writes trajectories.csv and beliefs.svg.
    Simulate,
    /// Generate a synthetic experiment panel; writes panel.csv.
    Panel,
    /// Estimate tables from a panel CSV.
    Estimate {
        panel: PathBuf,
        /// One of table1..table5, ttests, learning_effects; all when omitted.
        #[arg(long, value_name = "NAME")]
        which: Option<String>,
    },
    /// Fit Gaussian mixtures to (mark, phi) points from a panel CSV.
    Cluster {
        panel: PathBuf,
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
        /// Also refit with phi rescaled and with the other criterion.
        #[arg(long)]
        scale_check: bool,
    },
    /// Belief densities and mean-belief bands from a panel CSV.
    Figures { panel: PathBuf },
    /// Re-run a manifest and compare every artifact hash.
    Replay { manifest: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CriterionArg {
    Bic,
    Aic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Bic => Criterion::Bic,
            CriterionArg::Aic => Criterion::Aic,
        }
    }
}

fn out_dir(flag: Option<PathBuf>, fallback: impl FnOnce() -> PathBuf) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.unwrap_or_else(fallback),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Replay { manifest } = &cli.command {
        let m = RunManifest::load(manifest)?;
        let out = out_dir(cli.out, || manifest.parent().unwrap_or(Path::new(".")).join("replay"));
        let checks = replay(&m, &out)?;
        let mut bad = 0;
        for c in &checks {
            let status = if c.matches() { "identical" } else { "DIFFERS" };
            println!("{status}  {}", c.path);
            bad += usize::from(!c.matches());
        }
        if bad > 0 {
            return Err(CliError::Numerical(format!("{bad} of {} artifacts differ on replay", checks.len())));
        }
        println!("replayed {} artifacts into {}", checks.len(), out.display());
        return Ok(());
    }

    let scenario = Scenario::load_or_default(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(scenario.seed);
    let invocation = match cli.command {
        Command::Equilibrium => Invocation::Equilibrium,
        Command::Simulate => Invocation::Simulate,
        Command::Panel => Invocation::Panel,
        Command::Estimate { panel, which } => {
            let which = which.map(|w| w.parse::<Estimate>()).transpose().map_err(|e| CliError::Config(e.to_string()))?;
            Invocation::Estimate { panel, which }
        }
        Command::Cluster { panel, criterion, scale_check } => Invocation::Cluster {
            panel,
            criterion: criterion.map_or(scenario.clustering.criterion, Criterion::from),
            scale_check,
        },
        Command::Figures { panel } => Invocation::Figures { panel },
        Command::Replay { .. } => unreachable!("handled above"),
    };
    let out = out_dir(cli.out, || PathBuf::from(DEFAULT_OUT));
    let (result, manifest) = execute(&invocation, &scenario, seed, &out)?;
    print!("{}", result.report);
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} artifacts and manifest.json to {}", manifest.artifacts.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
