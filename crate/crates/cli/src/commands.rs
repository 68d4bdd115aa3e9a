//! The subcommands. Each `cmd_*` function is pure: it returns named artifacts and
//! leaves writing them to [`execute`].

use std::fs;
use std::path::{Path, PathBuf};

use mllab_core::analysis::{self, belief_densities, belief_summaries, cluster_points, Estimate, Group};
use mllab_core::clustering::{rand_index, scale_robustness, select_model, Criterion, Point, Selection};
use mllab_core::dynamics::monte_carlo;
use mllab_core::protocol::{generate_panel, PanelDataset};
use mllab_core::svg::{self, Chart};

use crate::config::{read_file, Scenario};
use crate::error::{io_error, CliError};
use crate::manifest::{sha256_hex, Artifact, Invocation, RunManifest, MANIFEST_FILE};

/// One file produced by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Output {
    fn text(name: impl Into<String>, s: String) -> Self {
        Self { name: name.into(), bytes: s.into_bytes() }
    }
}

/// Artifacts plus the human-readable report and any warnings.
#[derive(Debug, Clone, Default)]
pub struct CommandResult {
    pub outputs: Vec<Output>,
    pub report: String,
    pub warnings: Vec<String>,
}

pub fn cmd_equilibrium(scenario: &Scenario) -> Result<CommandResult, CliError> {
    let rows = analysis::equilibrium_sweep(&scenario.technology, &scenario.equilibrium)?;
    let csv = analysis::equilibrium_csv(&rows);
    Ok(CommandResult {
        report: format!("{} equilibrium rows\n", rows.len()),
        outputs: vec![Output::text("equilibrium.csv", csv)],
        warnings: Vec::new(),
    })
}

pub fn cmd_simulate(scenario: &Scenario, seed: u64) -> Result<CommandResult, CliError> {
    let sim = &scenario.simulation;
    scenario.technology.validate()?;
    let population = sim.population.draw(seed)?;
    let panel = monte_carlo(&population, &scenario.technology, sim.phi_true, sim.rounds, seed, sim.mode)?;
    let mut chart = Chart::new("Belief paths", "round", "believed phi (posterior mean)").y_range(0.0, 1.0);
    for (i, m) in population.iter().enumerate() {
        let path = panel.agent_rows(m.agent.id).map(|r| (r.round as f64, r.phi_point)).collect();
        chart = chart.thin_line(format!("agent {}", m.agent.id), svg::PALETTE[i % svg::PALETTE.len()], path);
    }
    chart = chart.hline("true phi", svg::GREEN, sim.phi_true);
    Ok(CommandResult {
        report: format!("{} agents x {} rounds\n", population.len(), sim.rounds),
        outputs: vec![Output::text("trajectories.csv", panel.to_csv_string()), Output::text("beliefs.svg", chart.render())],
        warnings: Vec::new(),
    })
}

pub fn cmd_panel(scenario: &Scenario, seed: u64) -> Result<CommandResult, CliError> {
    let data = generate_panel(&scenario.population, &scenario.experiment, &scenario.technology, seed)?;
    let excluded = data.records.iter().filter(|r| r.excluded).count();
    Ok(CommandResult {
        report: format!("{} subjects, {} records, {excluded} excluded\n", data.subjects.len(), data.records.len()),
        outputs: vec![Output::text("panel.csv", data.to_csv_string())],
        warnings: Vec::new(),
    })
}

pub fn load_panel(path: &Path) -> Result<PanelDataset, CliError> {
    let bytes = read_file(path)?;
    PanelDataset::from_csv_reader(bytes.as_slice()).map_err(CliError::from_data_stage)
}

/// Runs one estimate, or all of them when `which` is `None`. With a single
/// estimate numerical failures are fatal; when running all they become warnings.
pub fn cmd_estimate(data: &PanelDataset, which: Option<Estimate>, scenario: &Scenario) -> Result<CommandResult, CliError> {
    let list: Vec<Estimate> = which.map_or_else(|| Estimate::ALL.to_vec(), |w| vec![w]);
    let mut res = CommandResult::default();
    for e in list {
        match analysis::estimate(data, e, &scenario.experiment) {
            Ok(out) => {
                let mut text = String::new();
                let mut csv = String::new();
                for t in &out.tables {
                    text.push_str(&t.to_text());
                    text.push('\n');
                    csv.push_str(&t.to_csv());
                }
                res.report.push_str(&text);
                for w in &out.warnings {
                    text.push_str(&format!("warning: {w}\n"));
                    res.warnings.push(format!("{e}: {w}"));
                }
                res.outputs.push(Output::text(format!("{e}.csv"), csv));
                res.outputs.push(Output::text(format!("{e}.txt"), text));
            }
            Err(err) => {
                let err = CliError::from_data_stage(err);
                match (&err, which) {
                    (CliError::Numerical(m), None) => res.warnings.push(format!("{e}: {m}")),
                    _ => return Err(err),
                }
            }
        }
    }
    Ok(res)
}

fn selection_points(data: &PanelDataset, scenario: &Scenario) -> Result<(Vec<(u64, u32, Point)>, Vec<Point>), CliError> {
    let c = &scenario.clustering;
    let labelled = cluster_points(data, &c.rounds, c.group.group());
    if labelled.len() < c.k_min {
        return Err(CliError::Data(format!(
            "{} retained points in rounds {:?}, need at least {}",
            labelled.len(),
            c.rounds,
            c.k_min
        )));
    }
    let points = labelled.iter().map(|p| p.2).collect();
    Ok((labelled, points))
}

pub fn cmd_cluster(
    data: &PanelDataset,
    scenario: &Scenario,
    seed: u64,
    criterion: Criterion,
    scale_check: bool,
) -> Result<CommandResult, CliError> {
    let c = &scenario.clustering;
    let (labelled, points) = selection_points(data, scenario)?;
    let mut res = CommandResult::default();
    let k_max = c.k_max.min(points.len());
    if k_max < c.k_max {
        res.warnings.push(format!("only {} points; k range cut to {}..={k_max}", points.len(), c.k_min));
    }
    let range = c.k_min..=k_max;
    let sel = select_model(&points, range.clone(), criterion, seed).map_err(CliError::from_data_stage)?;
    let labels = sel.best.assign(&points);

    let mut csv = String::from("subject_id,round,mark,phi_hat,cluster\n");
    for ((id, round, p), l) in labelled.iter().zip(&labels) {
        csv.push_str(&format!("{id},{round},{},{},{l}\n", p[0], p[1]));
    }
    res.outputs.push(Output::text("clusters.csv", csv));
    res.outputs.push(Output::text("cluster_scores.csv", scores_csv(&sel)));

    let mut chart = Chart::new(format!("Mixture clusters (k = {})", sel.best.k), "mark", "phi");
    for k in 0..sel.best.k {
        let pts: Vec<(f64, f64)> = points.iter().zip(&labels).filter(|(_, l)| **l == k).map(|(p, _)| (p[0], p[1])).collect();
        chart = chart.scatter(format!("cluster {}", k + 1), svg::PALETTE[k % svg::PALETTE.len()], pts);
    }
    res.outputs.push(Output::text("clusters.svg", chart.render()));
    res.report = format!(
        "{} points, {} selects k = {} (log-likelihood {:.4})\n",
        points.len(),
        format!("{criterion:?}").to_uppercase(),
        sel.best.k,
        sel.best.log_likelihood
    );

    if scale_check {
        let scaled =
            scale_robustness(&points, 1, c.scale_factor, range.clone(), criterion, seed).map_err(CliError::from_data_stage)?;
        let other = match criterion {
            Criterion::Bic => Criterion::Aic,
            Criterion::Aic => Criterion::Bic,
        };
        let swap = select_model(&points, range, other, seed).map_err(CliError::from_data_stage)?;
        let swap_ri = rand_index(&labels, &swap.best.assign(&points));
        let mut csv = String::from("check,k_original,k_alternative,rand_index\n");
        csv.push_str(&format!("scale_phi_x{},{},{},{}\n", c.scale_factor, scaled.k_original, scaled.k_scaled, scaled.rand_index));
        csv.push_str(&format!("criterion_swap,{},{},{swap_ri}\n", sel.best.k, swap.best.k));
        res.report.push_str(&format!(
            "phi x{}: k {} -> {}, Rand index {:.4}\ncriterion swap: k {} -> {}, Rand index {swap_ri:.4}\n",
            c.scale_factor, scaled.k_original, scaled.k_scaled, scaled.rand_index, sel.best.k, swap.best.k
        ));
        res.outputs.push(Output::text("robustness.csv", csv));
    }
    Ok(res)
}

fn scores_csv(sel: &Selection) -> String {
    let mut s = String::from("k,log_likelihood,bic,aic,selected\n");
    for r in &sel.scores {
        s.push_str(&format!("{},{},{},{},{}\n", r.k, r.log_likelihood, r.bic, r.aic, u8::from(r.k == sel.best.k)));
    }
    s
}

pub fn cmd_figures(data: &PanelDataset, scenario: &Scenario) -> Result<CommandResult, CliError> {
    let rounds = scenario.experiment.rounds;
    let truth = scenario.experiment.marker_phi;
    let summaries = belief_summaries(data, rounds).map_err(CliError::from_data_stage)?;
    let densities = belief_densities(data, rounds).map_err(CliError::from_data_stage)?;
    let mut res = CommandResult::default();

    let mut csv = String::from("group,round,n,mean,sd\n");
    for s in &summaries {
        csv.push_str(&format!("{},{},{},{},{}\n", s.group.label(), s.round, s.n, s.mean, s.sd));
    }
    res.outputs.push(Output::text("belief_summary.csv", csv));

    for g in Group::BOTH {
        let mut chart = Chart::new(format!("Belief distribution by round, {} subjects", g.label()), "phi", "density");
        for d in densities.iter().filter(|d| d.group == g) {
            let pts = d.curve.x.iter().copied().zip(d.curve.density.iter().copied()).collect();
            chart = chart.line(format!("round {}", d.round), svg::PALETTE[(d.round as usize - 1) % svg::PALETTE.len()], pts);
        }
        chart = chart.vline("true phi", svg::GREEN, truth);
        res.outputs.push(Output::text(format!("belief_density_{}.svg", g.label()), chart.render()));
    }

    let mut chart = Chart::new("Mean belief by round (band: 2 sd)", "round", "phi");
    for (g, color) in [(Group::Overconfident, svg::BLUE), (Group::Underconfident, svg::RED)] {
        let rows: Vec<_> = summaries.iter().filter(|s| s.group == g && s.n > 0).collect();
        chart = chart
            .band(color, rows.iter().map(|s| (s.round as f64, s.mean - 2.0 * s.sd, s.mean + 2.0 * s.sd)).collect())
            .line(g.label(), color, rows.iter().map(|s| (s.round as f64, s.mean)).collect());
    }
    chart = chart.hline("true phi", svg::GREEN, truth);
    res.outputs.push(Output::text("mean_beliefs.svg", chart.render()));
    res.report = format!("{} belief summaries, {} density curves\n", summaries.len(), densities.len());
    Ok(res)
}

/// Runs an invocation without touching the filesystem (apart from reading its input).
pub fn run(invocation: &Invocation, scenario: &Scenario, seed: u64) -> Result<CommandResult, CliError> {
    match invocation {
        Invocation::Equilibrium => cmd_equilibrium(scenario),
        Invocation::Simulate => cmd_simulate(scenario, seed),
        Invocation::Panel => cmd_panel(scenario, seed),
        Invocation::Estimate { panel, which } => cmd_estimate(&load_panel(panel)?, *which, scenario),
        Invocation::Cluster { panel, criterion, scale_check } => {
            cmd_cluster(&load_panel(panel)?, scenario, seed, *criterion, *scale_check)
        }
        Invocation::Figures { panel } => cmd_figures(&load_panel(panel)?, scenario),
    }
}

/// Runs an invocation, writes its artifacts and manifest into `out`.
pub fn execute(
    invocation: &Invocation,
    scenario: &Scenario,
    seed: u64,
    out: &Path,
) -> Result<(CommandResult, RunManifest), CliError> {
    let inputs = match invocation.input() {
        Some(p) => vec![Artifact { path: absolute(p).display().to_string(), sha256: sha256_hex(&read_file(p)?) }],
        None => Vec::new(),
    };
    let result = run(invocation, scenario, seed)?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let mut artifacts = Vec::new();
    for o in &result.outputs {
        let path = out.join(&o.name);
        fs::write(&path, &o.bytes).map_err(|e| io_error(&path, e))?;
        artifacts.push(Artifact { path: o.name.clone(), sha256: sha256_hex(&o.bytes) });
    }
    let invocation = match invocation {
        Invocation::Estimate { panel, which } => Invocation::Estimate { panel: absolute(panel), which: *which },
        Invocation::Cluster { panel, criterion, scale_check } => {
            Invocation::Cluster { panel: absolute(panel), criterion: *criterion, scale_check: *scale_check }
        }
        Invocation::Figures { panel } => Invocation::Figures { panel: absolute(panel) },
        other => other.clone(),
    };
    let manifest = RunManifest {
        scenario: scenario.name.clone(),
        invocation,
        seed,
        config: scenario.clone(),
        inputs,
        artifacts,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_json()).map_err(|e| io_error(&path, e))?;
    Ok((result, manifest))
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Outcome of comparing one artifact of a replay against its manifest entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayCheck {
    pub path: String,
    pub expected: String,
    pub actual: Option<String>,
}

impl ReplayCheck {
    pub fn matches(&self) -> bool {
        self.actual.as_deref() == Some(self.expected.as_str())
    }
}

/// Re-executes a manifest into `out` and compares every artifact hash.
pub fn replay(manifest: &RunManifest, out: &Path) -> Result<Vec<ReplayCheck>, CliError> {
    for input in &manifest.inputs {
        let actual = sha256_hex(&read_file(Path::new(&input.path))?);
        if actual != input.sha256 {
            return Err(CliError::Data(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let (_, rerun) = execute(&manifest.invocation, &manifest.config, manifest.seed, out)?;
    Ok(manifest
        .artifacts
        .iter()
        .map(|a| ReplayCheck {
            path: a.path.clone(),
            expected: a.sha256.clone(),
            actual: rerun.artifacts.iter().find(|r| r.path == a.path).map(|r| r.sha256.clone()),
        })
        .collect())
}
