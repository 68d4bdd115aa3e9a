//! Round-by-round belief dynamics.
//!
//! Beliefs about the marker are a discrete posterior on a uniform grid over
//! `(0, 1]`. Each round the agent acts on the posterior mean, sees the gross
//! mark channel `phi * f(a, e) + noise`, and updates by Bayes' rule under the
//! misspecified model `phi * f(a~, e) + noise`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{self, AgentProfile, Technology};
use crate::par::{self, Backend};
use crate::seeds::{self, stream, SimRng};
use crate::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 200;
const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    support: Vec<f64>,
    mass: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    Uniform,
    TruncatedNormal { mean: f64, sd: f64 },
}

impl Default for PriorKind {
    fn default() -> Self {
        PriorKind::Uniform
    }
}

/// The default grid `k / n` for `k = 1..=n`.
pub fn default_support(points: usize) -> Vec<f64> {
    (1..=points).map(|k| k as f64 / points as f64).collect()
}

pub fn init_prior(kind: PriorKind) -> Result<BeliefGrid> {
    init_prior_on(kind, DEFAULT_GRID_POINTS)
}

pub fn init_prior_on(kind: PriorKind, points: usize) -> Result<BeliefGrid> {
    if points == 0 {
        return Err(Error::invalid("belief grid needs at least one point"));
    }
    let support = default_support(points);
    let mass = match kind {
        PriorKind::Uniform => vec![1.0; points],
        PriorKind::TruncatedNormal { mean, sd } => {
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(Error::invalid(format!("prior sd must be positive, got {sd}")));
            }
            if !mean.is_finite() {
                return Err(Error::invalid(format!("prior mean must be finite, got {mean}")));
            }
            support
                .iter()
                .map(|&p| {
                    let z = (p - mean) / sd;
                    (-0.5 * z * z).exp()
                })
                .collect()
        }
    };
    BeliefGrid::from_weights(support, mass)
}

impl BeliefGrid {
    /// Build from unnormalised nonnegative weights.
    pub fn from_weights(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() || support.is_empty() {
            return Err(Error::invalid("support and weights must be non-empty and equal length"));
        }
        if support.iter().any(|&p| !(p > 0.0 && p <= 1.0)) || support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support must be strictly increasing within (0,1]"));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("prior has no mass on the grid"));
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { support, mass })
    }

    pub fn point_mass(support: Vec<f64>, index: usize) -> Result<Self> {
        let mut w = vec![0.0; support.len()];
        *w.get_mut(index).ok_or_else(|| Error::invalid("point-mass index off grid"))? = 1.0;
        Self::from_weights(support, w)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn is_normalized(&self) -> bool {
        let s: f64 = self.mass.iter().sum();
        self.mass.iter().all(|&m| m >= 0.0) && (s - 1.0).abs() <= MASS_TOLERANCE
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.mass).map(|(p, m)| p * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.support.iter().zip(&self.mass).map(|(p, m)| m * (p - mu) * (p - mu)).sum::<f64>().max(0.0)
    }

    /// Smallest support point whose cumulative mass reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let mut acc = 0.0;
        for (p, m) in self.support.iter().zip(&self.mass) {
            acc += m;
            if acc >= q - 1e-12 && *m > 0.0 {
                return *p;
            }
        }
        *self.support.last().expect("non-empty support")
    }

    fn nearest_index(&self, phi: f64) -> usize {
        match self.support.binary_search_by(|p| p.total_cmp(&phi)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.support.len() => i - 1,
            Err(i) => {
                if (phi - self.support[i - 1]) <= (self.support[i] - phi) {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

/// Bayes update on an observed gross mark given the agent's own (possibly
/// wrong) ability and the effort they chose.
///
/// With `noise_sigma == 0` the observation pins the belief to the grid point
/// nearest `observed / f(a~, e)`.
pub fn bayes_update(
    belief: &BeliefGrid,
    tech: &Technology,
    believed_ability: f64,
    effort: f64,
    observed_gross: f64,
) -> Result<BeliefGrid> {
    if !(effort > 0.0) || !effort.is_finite() {
        return Err(Error::invalid(format!("update needs positive effort, got {effort}")));
    }
    if !observed_gross.is_finite() {
        return Err(Error::invalid("observation must be finite"));
    }
    let expected_gross = tech.production(believed_ability, effort);
    if !(expected_gross > 0.0) {
        return Err(Error::invalid("expected gross output is zero; observation carries no information"));
    }

    let sigma = tech.noise_sigma;
    if sigma == 0.0 {
        let target = (observed_gross / expected_gross).clamp(belief.support[0], 1.0);
        let idx = belief.nearest_index(target);
        if belief.mass[idx] <= 0.0 {
            return Err(Error::DegenerateUpdate { observed: observed_gross });
        }
        return BeliefGrid::point_mass(belief.support.clone(), idx);
    }

    // Log-space so sharp likelihoods cannot underflow every point at once.
    let log_post: Vec<f64> = belief
        .support
        .iter()
        .zip(&belief.mass)
        .map(|(&phi, &m)| {
            if m > 0.0 {
                let z = (observed_gross - phi * expected_gross) / sigma;
                m.ln() - 0.5 * z * z
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateUpdate { observed: observed_gross });
    }
    let weights = log_post.iter().map(|&l| (l - max).exp()).collect();
    BeliefGrid::from_weights(belief.support.clone(), weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Noise draws forced to zero.
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    /// Starts at 1.
    pub round: u32,
    /// Posterior mean the agent acts on this round.
    pub phi_point: f64,
    pub effort: f64,
    pub expected_output: f64,
    pub realized_output: f64,
    pub surprise_realized: f64,
    /// Variance of the belief the agent acted on.
    pub posterior_variance: f64,
}

/// Simulate one agent for `rounds` rounds.
pub fn simulate(
    agent: &AgentProfile,
    tech: &Technology,
    phi_true: f64,
    prior: &BeliefGrid,
    rounds: u32,
    seed: u64,
    mode: Mode,
) -> Result<Vec<TrajectoryRecord>> {
    let mut rng = seeds::rng_from(seed);
    simulate_with_rng(agent, tech, phi_true, prior, rounds, mode, &mut rng)
}

fn simulate_with_rng(
    agent: &AgentProfile,
    tech: &Technology,
    phi_true: f64,
    prior: &BeliefGrid,
    rounds: u32,
    mode: Mode,
    rng: &mut SimRng,
) -> Result<Vec<TrajectoryRecord>> {
    tech.validate()?;
    if rounds == 0 {
        return Err(Error::invalid("need at least one round"));
    }
    if !(phi_true > 0.0 && phi_true <= 1.0) {
        return Err(Error::invalid(format!("phi_true must lie in (0,1], got {phi_true}")));
    }
    let tech = match mode {
        Mode::Deterministic => tech.noiseless(),
        Mode::Stochastic => *tech,
    };
    let noise = Normal::new(0.0, tech.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");

    let mut belief = prior.clone();
    let mut out = Vec::with_capacity(rounds as usize);
    for round in 1..=rounds {
        let phi_point = belief.mean();
        let effort = model::optimal_effort(&tech, agent.believed_ability(), phi_point)?;
        let eps = if tech.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
        let expected = model::expected_output(&tech, agent.believed_ability(), phi_point, effort)?;
        let realized = model::realized_output(&tech, agent.true_ability(), phi_true, effort, eps)?;
        out.push(TrajectoryRecord {
            round,
            phi_point,
            effort,
            expected_output: expected,
            realized_output: realized,
            surprise_realized: realized - expected,
            posterior_variance: belief.variance(),
        });
        if round < rounds && effort > 0.0 {
            let observed = phi_true * tech.production(agent.true_ability(), effort) + eps;
            belief = bayes_update(&belief, &tech, agent.believed_ability(), effort, observed)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMember {
    pub agent: AgentProfile,
    pub prior: BeliefGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelRow {
    pub agent_id: u64,
    #[serde(flatten)]
    pub record: TrajectoryRecord,
}

/// Trajectories for a population, ordered by (agent id, round).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryPanel {
    pub rows: Vec<PanelRow>,
}

impl TrajectoryPanel {
    /// `phi_point` values for one round, in agent order.
    pub fn round_beliefs(&self, round: u32) -> Vec<f64> {
        self.rows.iter().filter(|r| r.record.round == round).map(|r| r.record.phi_point).collect()
    }

    pub fn agent_rows(&self, agent_id: u64) -> impl Iterator<Item = &TrajectoryRecord> {
        self.rows.iter().filter(move |r| r.agent_id == agent_id).map(|r| &r.record)
    }

    pub const CSV_HEADER: &'static str =
        "agent_id,round,phi_point,effort,expected_output,realized_output,surprise_realized,posterior_variance";

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let t = &r.record;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.agent_id,
                t.round,
                t.phi_point,
                t.effort,
                t.expected_output,
                t.realized_output,
                t.surprise_realized,
                t.posterior_variance
            ));
        }
        s
    }
}

/// Seed used for the agent with the given id under a master seed.
pub fn agent_seed(master: u64, agent_id: u64) -> u64 {
    seeds::derive(master, stream::AGENT, agent_id)
}

pub fn monte_carlo(
    population: &[PopulationMember],
    tech: &Technology,
    phi_true: f64,
    rounds: u32,
    seed: u64,
    mode: Mode,
) -> Result<TrajectoryPanel> {
    monte_carlo_with(Backend::default(), population, tech, phi_true, rounds, seed, mode)
}

pub fn monte_carlo_with(
    backend: Backend,
    population: &[PopulationMember],
    tech: &Technology,
    phi_true: f64,
    rounds: u32,
    seed: u64,
    mode: Mode,
) -> Result<TrajectoryPanel> {
    let runs = par::map_slice(backend, population, |m| {
        simulate(&m.agent, tech, phi_true, &m.prior, rounds, agent_seed(seed, m.agent.id), mode).map(|t| (m.agent.id, t))
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|(id, _)| *id);
    let rows =
        runs.into_iter().flat_map(|(agent_id, recs)| recs.into_iter().map(move |record| PanelRow { agent_id, record })).collect();
    Ok(TrajectoryPanel { rows })
}

/// Population generator used by the Monte Carlo prediction checks: each agent
/// gets a truncated-normal prior whose centre is drawn uniformly on the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub agents: usize,
    pub ability_min: f64,
    pub ability_max: f64,
    /// Signed gap `a~ - a` is drawn uniformly from this range.
    pub gap_min: f64,
    pub gap_max: f64,
    pub prior_center_min: f64,
    pub prior_center_max: f64,
    pub prior_sd: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self::overconfident(100)
    }
}

impl PopulationSpec {
    pub fn overconfident(agents: usize) -> Self {
        Self {
            agents,
            ability_min: 3.0,
            ability_max: 6.0,
            gap_min: 0.5,
            gap_max: 2.5,
            prior_center_min: 0.05,
            prior_center_max: 0.95,
            prior_sd: 0.15,
        }
    }

    /// Small gaps, as in the bounded-learning illustration.
    pub fn underconfident(agents: usize) -> Self {
        Self { gap_min: -0.5, gap_max: 0.0, ..Self::overconfident(agents) }
    }

    pub fn draw(&self, seed: u64) -> Result<Vec<PopulationMember>> {
        if !(self.ability_min > 0.0 && self.ability_max >= self.ability_min) {
            return Err(Error::Configuration("ability range must be positive and ordered".into()));
        }
        if self.gap_max < self.gap_min || self.prior_center_max < self.prior_center_min {
            return Err(Error::Configuration("ranges must be ordered".into()));
        }
        (0..self.agents)
            .map(|i| {
                let mut rng = seeds::derived_rng(seed, stream::POPULATION, i as u64);
                let a = uniform(&mut rng, self.ability_min, self.ability_max);
                let ab = (a + uniform(&mut rng, self.gap_min, self.gap_max)).max(0.05);
                let center = uniform(&mut rng, self.prior_center_min, self.prior_center_max);
                Ok(PopulationMember {
                    agent: AgentProfile::new(i as u64, a, ab)?,
                    prior: init_prior(PriorKind::TruncatedNormal { mean: center, sd: self.prior_sd })?,
                })
            })
            .collect()
    }
}

fn uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}
