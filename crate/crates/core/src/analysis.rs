//! Table and figure pipelines over experiment panels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::Point;
use crate::econometrics::table::{coef_cell, se_cell, Table};
use crate::econometrics::{
    self, diff_gmm, hausman, kde, ols, paired_t_one_sided, random_effects, variance_target, within_fe, Alternative, Bandwidth,
    GmmResult, Instrument, KdeCurve, LongPanel, RegressionResult, VarianceMode,
};
use crate::equilibrium::solve_equilibrium;
use crate::model::{AgentProfile, Technology};
use crate::protocol::{ExperimentConfig, PanelDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
    Ttests,
    LearningEffects,
}

impl Estimate {
    pub const ALL: [Estimate; 7] = [
        Estimate::Table1,
        Estimate::Table2,
        Estimate::Table3,
        Estimate::Table4,
        Estimate::Table5,
        Estimate::Ttests,
        Estimate::LearningEffects,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimate::Table1 => "table1",
            Estimate::Table2 => "table2",
            Estimate::Table3 => "table3",
            Estimate::Table4 => "table4",
            Estimate::Table5 => "table5",
            Estimate::Ttests => "ttests",
            Estimate::LearningEffects => "learning_effects",
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimate::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::invalid(format!("unknown estimate {s:?}")))
    }
}

/// Tables produced by one estimate, plus recoverable problems met on the way.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateOutput {
    pub which: Estimate,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub details: Details,
}

/// Raw estimator results behind the formatted tables.
#[derive(Debug, Clone, Default)]
pub struct Details {
    pub regressions: Vec<RegressionResult>,
    pub gmm: Vec<GmmResult>,
}

pub fn estimate(data: &PanelDataset, which: Estimate, config: &ExperimentConfig) -> Result<EstimateOutput> {
    let panel = data.analysis_panel();
    let mut out = EstimateOutput { which, tables: Vec::new(), warnings: Vec::new(), details: Details::default() };
    match which {
        Estimate::Table1 => out.tables.push(descriptives(data, config)),
        Estimate::Table2 => belief_gap(&panel, &mut out)?,
        Estimate::Table3 => effort_effects(&panel, &mut out)?,
        Estimate::Table4 => structural(&panel, Group::Overconfident, &mut out)?,
        Estimate::Table5 => structural(&panel, Group::Underconfident, &mut out)?,
        Estimate::Ttests => belief_ttests(&panel, config.rounds, &mut out)?,
        Estimate::LearningEffects => learning_effects(&panel, &mut out)?,
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Overconfident,
    Underconfident,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Overconfident, Group::Underconfident];

    pub fn label(self) -> &'static str {
        match self {
            Group::Overconfident => "overconfident",
            Group::Underconfident => "underconfident",
        }
    }

    fn flag(self) -> f64 {
        match self {
            Group::Overconfident => 1.0,
            Group::Underconfident => 0.0,
        }
    }
}

pub fn group_panel(panel: &LongPanel, group: Group) -> Result<LongPanel> {
    let oc = panel.column("overconfident")?;
    Ok(panel.filter(|i| oc[i] == group.flag()))
}

fn moments(v: &[f64]) -> (usize, f64, f64) {
    if v.is_empty() {
        return (0, f64::NAN, f64::NAN);
    }
    // Shifting by the first value keeps constant samples exact.
    let d: Vec<f64> = v.iter().map(|x| x - v[0]).collect();
    let sd = if v.len() > 1 { econometrics::sample_sd(&d) } else { f64::NAN };
    (v.len(), v[0] + econometrics::mean(&d), sd)
}

fn descriptives(data: &PanelDataset, config: &ExperimentConfig) -> Table {
    let first: Vec<_> = data.records.iter().filter(|r| r.round == 1).collect();
    let overconfidence: Vec<f64> = first.iter().filter_map(|r| r.stated_score_r1.map(|s| s as f64 - r.score as f64)).collect();
    let score: Vec<f64> = first.iter().map(|r| r.score as f64).collect();
    let implied: Vec<f64> = first.iter().map(|r| r.implied_score(config)).collect();
    let phi: Vec<f64> = first.iter().filter(|r| !r.excluded).filter_map(|r| r.phi_hat).collect();
    let mut t = Table::new("Confidence, scores, bids and beliefs (round 1)", vec!["N".into(), "Mean".into(), "St. Dev.".into()]);
    for (label, v) in [("Overconfidence", overconfidence), ("Score", score), ("Bid (implied score)", implied), ("Phi", phi)] {
        let (n, m, s) = moments(&v);
        t.row(label, vec![n.to_string(), format!("{m:.3}"), format!("{s:.3}")]);
    }
    t.note(
        "Overconfidence is the stated round-1 score minus the actual score; implied score is bid over the final-test piece rate.",
    );
    t
}

/// Adds a coefficient row and its standard-error row, one cell per column.
fn push_coef_rows(t: &mut Table, label: &str, name: &str, fits: &[&RegressionResult]) {
    let coef = fits
        .iter()
        .map(|f| match (f.coef(name), f.p(name)) {
            (Some(b), Some(p)) => coef_cell(b, p),
            _ => String::new(),
        })
        .collect();
    let se = fits.iter().map(|f| f.se(name).map(se_cell).unwrap_or_default()).collect();
    t.row(label, coef);
    t.row("", se);
}

fn round_cross_section(panel: &LongPanel, round: u32) -> LongPanel {
    panel.filter(|i| panel.period[i] == round)
}

fn belief_gap(panel: &LongPanel, out: &mut EstimateOutput) -> Result<()> {
    panel.require(&["phi_hat", "overconfident", "male", "age", "white"])?;
    let last = panel.period.iter().copied().max().unwrap_or(1);
    let specs: [&[&str]; 4] = [
        &["overconfident"],
        &["overconfident", "male"],
        &["overconfident", "male", "age"],
        &["overconfident", "male", "age", "white"],
    ];
    let mut fits = Vec::new();
    for round in [1, last] {
        let cs = round_cross_section(panel, round);
        let y = cs.column("phi_hat")?;
        for spec in specs {
            let x: Vec<(&str, &[f64])> = spec.iter().map(|n| Ok((*n, cs.column(n)?))).collect::<Result<_>>()?;
            fits.push(ols(y, &x, true)?);
        }
    }
    let columns = (1..=fits.len()).map(|i| format!("({i})")).collect();
    let mut t = Table::new(format!("Beliefs about the marker after round 1 (1-4) and round {last} (5-8)"), columns);
    let refs: Vec<&RegressionResult> = fits.iter().collect();
    for (label, name) in [
        ("1 if overconfident", "overconfident"),
        ("1 if male", "male"),
        ("Age", "age"),
        ("1 if white", "white"),
        ("Constant", econometrics::INTERCEPT),
    ] {
        push_coef_rows(&mut t, label, name, &refs);
    }
    t.row("Observations", fits.iter().map(|f| f.n_obs.to_string()).collect());
    t.row("Adjusted R2", fits.iter().map(|f| format!("{:.3}", f.adj_r_squared)).collect());
    t.note("Dependent variable: recovered phi. Standard errors in parentheses.");
    out.tables.push(t);
    out.details.regressions = fits;
    Ok(())
}

fn with_interaction(panel: &LongPanel) -> Result<LongPanel> {
    let round = panel.column("round")?;
    let oc = panel.column("overconfident")?;
    let inter = round.iter().zip(oc).map(|(r, o)| r * o).collect();
    panel.clone().with("round_x_overconfident", inter)
}

fn effort_effects(panel: &LongPanel, out: &mut EstimateOutput) -> Result<()> {
    panel.require(&["effort", "round", "overconfident"])?;
    let mut fits = Vec::new();
    for g in Group::BOTH {
        fits.push(random_effects(&group_panel(panel, g)?, "effort", &["round"])?);
    }
    let pooled = with_interaction(panel)?;
    fits.push(random_effects(&pooled, "effort", &["round", "overconfident", "round_x_overconfident"])?);
    let mut t = Table::new(
        "Effect of updating on effort (random effects)",
        vec!["(1) overconfident".into(), "(2) underconfident".into(), "(3) pooled".into()],
    );
    let refs: Vec<&RegressionResult> = fits.iter().collect();
    for (label, name) in [
        ("Round", "round"),
        ("Overconfident", "overconfident"),
        ("Round x Overconfident", "round_x_overconfident"),
        ("Constant", econometrics::INTERCEPT),
    ] {
        push_coef_rows(&mut t, label, name, &refs);
    }
    t.row("N", fits.iter().map(|f| f.n_obs.to_string()).collect());
    t.note("Dependent variable: seconds spent on the round's questions. Standard errors in parentheses.");
    for f in &fits {
        out.warnings.extend(f.notes.iter().cloned());
    }
    out.tables.push(t);
    out.details.regressions = fits;
    Ok(())
}

/// Instrument sets in column order: lagged level only, lagged effort only, both.
pub const STRUCTURAL_SPECS: [&[Instrument]; 3] =
    [&[Instrument::Lag2Dep], &[Instrument::LagEffort], &[Instrument::LagEffort, Instrument::Lag2Dep]];

/// The specification with the strongest first stage, which is the one read as
/// the structural estimate.
pub fn preferred_spec(fits: &[GmmResult]) -> Option<&GmmResult> {
    fits.iter().filter(|r| r.first_stage_f.is_finite()).max_by(|a, b| a.first_stage_f.total_cmp(&b.first_stage_f))
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

/// Subsample for `group` and the column its learning hypothesis is about: the
/// belief itself for overconfident subjects, its squared distance from the
/// round mean for underconfident ones.
pub fn group_target(panel: &LongPanel, group: Group) -> Result<(LongPanel, &'static str)> {
    let mut sub = group_panel(panel, group)?;
    match group {
        Group::Overconfident => Ok((sub, "phi_hat")),
        Group::Underconfident => {
            let y = variance_target(&sub, "phi_hat", VarianceMode::SqDevFromRoundMean)?;
            sub.insert("belief_dispersion", y)?;
            Ok((sub, "belief_dispersion"))
        }
    }
}

fn structural(panel: &LongPanel, group: Group, out: &mut EstimateOutput) -> Result<()> {
    panel.require(&["phi_hat", "effort", "overconfident"])?;
    let (sub, dep) = group_target(panel, group)?;
    let (title, dep_label) = match group {
        Group::Overconfident => ("Structural model of updating, overconfident subjects", "phi"),
        Group::Underconfident => ("Structural model of updating, underconfident subjects", "y"),
    };
    let mut cols: Vec<Option<GmmResult>> = Vec::new();
    for spec in STRUCTURAL_SPECS {
        match diff_gmm(&sub, dep, "effort", spec) {
            Ok(r) => cols.push(Some(r)),
            Err(e @ (Error::Underidentified { .. } | Error::SingularDesign { .. })) => {
                out.warnings.push(format!("{}: {e}", spec_label(spec)));
                cols.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let mut t = Table::new(title, vec!["(1)".into(), "(2)".into(), "(3)".into()]);
    let cell = |f: &dyn Fn(&GmmResult) -> String| -> Vec<String> {
        cols.iter().map(|c| c.as_ref().map(f).unwrap_or_else(|| "n/a".into())).collect()
    };
    t.row("d Round", cell(&|r| coef_cell(r.drift, r.drift_p)));
    t.row("", cell(&|r| se_cell(r.drift_se)));
    t.row(format!("d {dep_label}(t-1)"), cell(&|r| coef_cell(r.persistence, r.persistence_p)));
    t.row("", cell(&|r| se_cell(r.persistence_se)));
    let yes_no = |i: Instrument| -> Vec<String> {
        STRUCTURAL_SPECS.iter().map(|s| if s.contains(&i) { "Yes" } else { "No" }.to_string()).collect()
    };
    t.row("Instrument: d Effort(t-1)", yes_no(Instrument::LagEffort));
    t.row(format!("Instrument: {dep_label}(t-2)"), yes_no(Instrument::Lag2Dep));
    t.row("J statistic", cell(&|r| opt_cell(r.sargan_j)));
    t.row("J p-value", cell(&|r| opt_cell(r.sargan_p)));
    t.row("First-stage F", cell(&|r| format!("{:.2}", r.first_stage_f)));
    t.row("Autocorrelation test (1)", cell(&|r| format!("{:.2}", r.ar1)));
    t.row("Autocorrelation test (2)", cell(&|r| opt_cell(r.ar2)));
    t.row("N", cell(&|r| r.n_obs.to_string()));
    let fits: Vec<GmmResult> = cols.iter().flatten().cloned().collect();
    if let Some(best) = preferred_spec(&fits) {
        if let Some(col) = STRUCTURAL_SPECS.iter().position(|s| *s == best.instruments.as_slice()) {
            t.note(format!("Preferred specification (largest first-stage F): column ({}).", col + 1));
        }
    }
    t.note("Two-step difference GMM; the differenced round is a constant, reported as d Round.");
    if group == Group::Underconfident {
        t.note("y is the squared deviation of phi from the round mean across underconfident subjects.");
    }
    out.tables.push(t);
    out.details.gmm = cols.into_iter().flatten().collect();
    Ok(())
}

fn spec_label(spec: &[Instrument]) -> String {
    spec.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("+")
}

/// One-sided paired tests of round-1 beliefs against each later round, per group.
fn belief_ttests(panel: &LongPanel, rounds: u32, out: &mut EstimateOutput) -> Result<()> {
    panel.require(&["phi_hat", "overconfident"])?;
    let mut t = Table::new(
        "Paired one-sided t-tests: round 1 against round t (H1: the quantity falls)",
        Group::BOTH.iter().map(|g| g.label().to_string()).collect(),
    );
    let subs: Vec<(LongPanel, &str)> = Group::BOTH.iter().map(|&g| group_target(panel, g)).collect::<Result<_>>()?;
    for later in 2..=rounds {
        let mut cells = Vec::new();
        for (g, (sub, col)) in Group::BOTH.iter().zip(&subs) {
            let (before, after) = paired_rounds(sub, col, 1, later)?;
            match paired_t_one_sided(&before, &after, Alternative::Less) {
                Ok(r) => cells.push(r.to_string()),
                Err(e @ (Error::DegenerateTest(_) | Error::InvalidArgument(_))) => {
                    out.warnings.push(format!("{} round 1 vs {later}: {e}", g.label()));
                    cells.push("n/a".into());
                }
                Err(e) => return Err(e),
            }
        }
        t.row(format!("round 1 vs {later}"), cells);
    }
    t.note("Cells show (mean difference later minus round 1, one-sided p-value).");
    t.note("Overconfident: belief about the marker. Underconfident: squared distance of that belief from the round mean.");
    out.tables.push(t);
    Ok(())
}

/// Values of `col` in two periods for units observed in both, in unit order.
pub fn paired_rounds(panel: &LongPanel, col: &str, first: u32, second: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = panel.column(col)?;
    let mut before = Vec::new();
    let mut after = Vec::new();
    for rows in panel.groups() {
        let at = |t: u32| rows.iter().find(|&&r| panel.period[r] == t).map(|&r| v[r]);
        if let (Some(a), Some(b)) = (at(first), at(second)) {
            before.push(a);
            after.push(b);
        }
    }
    Ok((before, after))
}

fn learning_effects(panel: &LongPanel, out: &mut EstimateOutput) -> Result<()> {
    panel.require(&["score", "round", "overconfident"])?;
    let mut fits = Vec::new();
    let mut tests = Vec::new();
    for g in Group::BOTH {
        let sub = group_panel(panel, g)?;
        let fe = within_fe(&sub, "score", &["round"])?;
        match random_effects(&sub, "score", &["round"]).and_then(|re| hausman(&fe, &re)) {
            Ok(h) => tests.push(format!("{:.3} (p {:.3})", h.statistic, h.p_value)),
            Err(e) => {
                out.warnings.push(format!("{} Hausman: {e}", g.label()));
                tests.push("n/a".into());
            }
        }
        fits.push(fe);
    }
    let mut t = Table::new(
        "Learning effects: test score on round (fixed effects)",
        vec!["(1) overconfident".into(), "(2) underconfident".into()],
    );
    let refs: Vec<&RegressionResult> = fits.iter().collect();
    push_coef_rows(&mut t, "Round", "round", &refs);
    t.row("Observations", fits.iter().map(|f| f.n_obs.to_string()).collect());
    t.row("R2", fits.iter().map(|f| format!("{:.4}", f.r_squared)).collect());
    t.row("Hausman FE vs RE", tests);
    for f in &fits {
        out.warnings.extend(f.notes.iter().cloned());
    }
    out.tables.push(t);
    out.details.regressions = fits;
    Ok(())
}

/// Mean and spread of recovered beliefs for one group in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeliefSummary {
    pub group: Group,
    pub round: u32,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

pub fn belief_summaries(data: &PanelDataset, rounds: u32) -> Result<Vec<BeliefSummary>> {
    let panel = data.analysis_panel();
    let phi = panel.column("phi_hat")?;
    let mut out = Vec::new();
    for g in Group::BOTH {
        let oc = panel.column("overconfident")?;
        for round in 1..=rounds {
            let v: Vec<f64> =
                (0..panel.len()).filter(|&i| oc[i] == g.flag() && panel.period[i] == round).map(|i| phi[i]).collect();
            let (n, mean, sd) = moments(&v);
            // A single observation has no spread to draw.
            let sd = if n == 1 { 0.0 } else { sd };
            out.push(BeliefSummary { group: g, round, n, mean, sd });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefDensity {
    pub group: Group,
    pub round: u32,
    pub curve: KdeCurve,
}

/// Kernel densities of recovered beliefs per group and round; cells with fewer
/// than two observations are skipped.
pub fn belief_densities(data: &PanelDataset, rounds: u32) -> Result<Vec<BeliefDensity>> {
    let panel = data.analysis_panel();
    let phi = panel.column("phi_hat")?;
    let oc = panel.column("overconfident")?;
    let mut out = Vec::new();
    for g in Group::BOTH {
        for round in 1..=rounds {
            let v: Vec<f64> =
                (0..panel.len()).filter(|&i| oc[i] == g.flag() && panel.period[i] == round).map(|i| phi[i]).collect();
            if v.len() >= 2 {
                out.push(BeliefDensity { group: g, round, curve: kde(&v, Bandwidth::Silverman)? });
            }
        }
    }
    Ok(out)
}

/// Stacked (mark, phi) points from the given rounds, optionally one group only.
/// Each point carries its subject id and round.
pub fn cluster_points(data: &PanelDataset, rounds: &[u32], group: Option<Group>) -> Vec<(u64, u32, Point)> {
    let mut out = Vec::new();
    for &round in rounds {
        for r in data.records.iter().filter(|r| r.round == round && !r.excluded) {
            let Some(phi) = r.phi_hat else { continue };
            let Some(info) = data.subject(r.subject_id) else { continue };
            if let Some(g) = group {
                if info.overconfident != (g == Group::Overconfident) {
                    continue;
                }
            }
            out.push((r.subject_id, round, [r.mark, phi]));
        }
    }
    out
}

/// Grid of parameters for an equilibrium sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumGrid {
    pub true_ability: Vec<f64>,
    pub believed_ability: Vec<f64>,
    pub phi_true: Vec<f64>,
}

impl Default for EquilibriumGrid {
    fn default() -> Self {
        Self {
            true_ability: vec![3.0, 4.0, 5.0],
            believed_ability: vec![3.0, 4.0, 5.0, 6.0],
            phi_true: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumRow {
    pub true_ability: f64,
    pub believed_ability: f64,
    pub phi_true: f64,
    pub phi_limit: f64,
    pub effort_limit: f64,
    pub boundary: bool,
}

pub const EQUILIBRIUM_HEADER: &str = "true_ability,believed_ability,phi_true,phi_limit,effort_limit,boundary";

pub fn equilibrium_sweep(tech: &Technology, grid: &EquilibriumGrid) -> Result<Vec<EquilibriumRow>> {
    let mut out = Vec::new();
    for &a in &grid.true_ability {
        for &ab in &grid.believed_ability {
            for &phi in &grid.phi_true {
                let agent = AgentProfile::new(0, a, ab)?;
                let eq = solve_equilibrium(tech, &agent, phi)?;
                out.push(EquilibriumRow {
                    true_ability: a,
                    believed_ability: ab,
                    phi_true: phi,
                    phi_limit: eq.phi_limit,
                    effort_limit: eq.effort_limit,
                    boundary: eq.boundary,
                });
            }
        }
    }
    Ok(out)
}

pub fn equilibrium_csv(rows: &[EquilibriumRow]) -> String {
    let mut s = String::from(EQUILIBRIUM_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.true_ability,
            r.believed_ability,
            r.phi_true,
            r.phi_limit,
            r.effort_limit,
            u8::from(r.boundary)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{generate_panel, RoundRecord, SubjectInfo, SubjectPopulation};

    fn calibrated(seed: u64) -> PanelDataset {
        generate_panel(&SubjectPopulation::default(), &ExperimentConfig::default(), &Technology::default(), seed).unwrap()
    }

    #[test]
    fn estimate_names_round_trip() {
        for e in Estimate::ALL {
            assert_eq!(e.name().parse::<Estimate>().unwrap(), e);
        }
        assert!("table9".parse::<Estimate>().is_err());
    }

    #[test]
    fn every_estimate_runs_on_a_calibrated_panel() {
        let data = calibrated(1);
        let config = ExperimentConfig::default();
        for e in Estimate::ALL {
            let out = estimate(&data, e, &config).unwrap();
            assert!(!out.tables.is_empty(), "{e}");
            for t in &out.tables {
                assert!(t.to_csv().starts_with("variable,"));
            }
        }
    }

    #[test]
    fn ttests_use_difference_and_p_format() {
        let out = estimate(&calibrated(2), Estimate::Ttests, &ExperimentConfig::default()).unwrap();
        let cell = out.tables[0].cell("round 1 vs 2", 0).unwrap();
        assert!(cell.starts_with('(') && cell.contains(", p-value: ") && cell.ends_with(')'), "{cell}");
        assert_eq!(out.tables[0].rows.len(), 4);
    }

    fn constant_panel() -> PanelDataset {
        let mut subjects = Vec::new();
        let mut records = Vec::new();
        for id in 0..6u64 {
            subjects.push(SubjectInfo {
                subject_id: id,
                overconfident: id % 2 == 0,
                male: id < 3,
                age: 20 + id as u32,
                white: id % 3 == 0,
            });
            for round in 1..=5 {
                records.push(RoundRecord {
                    subject_id: id,
                    round,
                    score: 4,
                    mark: 1.0,
                    bid: 1.0,
                    phi_hat: Some(0.5),
                    effort_seconds: 100.0,
                    stated_score_r1: (round == 1).then_some(5),
                    excluded: false,
                });
            }
        }
        PanelDataset { subjects, records }
    }

    #[test]
    fn constant_beliefs_give_degenerate_test_warnings() {
        let out = estimate(&constant_panel(), Estimate::Ttests, &ExperimentConfig::default()).unwrap();
        // All-zero differences are a valid test with t = 0.
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        assert!(out.tables[0].cell("round 1 vs 5", 0).unwrap().contains("p-value: 0.500"));
    }

    #[test]
    fn constant_beliefs_give_flat_summaries() {
        let s = belief_summaries(&constant_panel(), 5).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|b| b.mean == 0.5 && b.sd == 0.0));
    }

    #[test]
    fn descriptives_count_subjects() {
        let data = calibrated(3);
        let t = descriptives(&data, &ExperimentConfig::default());
        assert_eq!(t.cell("Score", 0), Some("189"));
        assert_eq!(t.cell("Overconfidence", 0), Some("189"));
    }

    #[test]
    fn cluster_points_filter_by_group() {
        let data = calibrated(4);
        let all = cluster_points(&data, &[1, 5], None);
        let oc = cluster_points(&data, &[1, 5], Some(Group::Overconfident));
        let uc = cluster_points(&data, &[1, 5], Some(Group::Underconfident));
        assert_eq!(all.len(), oc.len() + uc.len());
        assert!(oc.iter().all(|(id, _, _)| data.subject(*id).unwrap().overconfident));
    }

    #[test]
    fn sweep_shows_known_rows() {
        let tech = Technology::default();
        let grid = EquilibriumGrid { true_ability: vec![4.0], believed_ability: vec![4.0, 5.0], phi_true: vec![0.5] };
        let rows = equilibrium_sweep(&tech, &grid).unwrap();
        assert!((rows[0].phi_limit - 0.5).abs() < 1e-8);
        assert!((rows[1].phi_limit - 0.4).abs() < 1e-8);
        let empty = EquilibriumGrid { true_ability: vec![], ..grid };
        assert_eq!(equilibrium_csv(&equilibrium_sweep(&tech, &empty).unwrap()), format!("{EQUILIBRIUM_HEADER}\n"));
    }
}
