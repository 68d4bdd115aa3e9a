//! The marked-test experiment run on simulated subjects.
//!
//! Each round a subject chooses effort on their posterior mean, answers
//! `questions_per_round` questions (binomial score), sees the marker's
//! `marker_phi` share of correct answers as marks, updates, and bids for a
//! final unmarked test in a BDM auction.

use std::io::Read;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{bayes_update, init_prior, BeliefGrid, PriorKind};
use crate::econometrics::LongPanel;
use crate::model::{self, AgentProfile, Confidence, Technology};
use crate::par::{self, Backend};
use crate::seeds::{self, stream, SimRng};
use crate::{Error, Result};

/// Which effort the bid values the final test at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BidBasis {
    /// Effort optimal when every correct answer is marked (`phi = 1`).
    #[default]
    FinalTest,
    /// The effort the subject just exerted in the marked round.
    CurrentRound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rounds: u32,
    pub questions_per_round: u32,
    pub marker_phi: f64,
    pub piece_rate_round: f64,
    pub piece_rate_final: f64,
    pub bdm_price_cap: f64,
    pub confidence_bonus: f64,
    pub participation_fee: f64,
    /// Standard deviation subjects attribute to their marks when updating.
    pub perceived_mark_sd: f64,
    pub seconds_per_effort: f64,
    pub timing_noise_sd: f64,
    pub min_effort_seconds: f64,
    /// Optional Normal noise on bids; zero means truthful bidding.
    pub bid_noise_sd: f64,
    pub bid_basis: BidBasis,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            questions_per_round: 8,
            marker_phi: 0.5,
            piece_rate_round: 0.05,
            piece_rate_final: 0.20,
            bdm_price_cap: 1.60,
            confidence_bonus: 0.10,
            participation_fee: 1.00,
            perceived_mark_sd: 1.0,
            seconds_per_effort: 60.0,
            timing_noise_sd: 10.0,
            min_effort_seconds: 5.0,
            bid_noise_sd: 0.0,
            bid_basis: BidBasis::FinalTest,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Configuration(m));
        if self.rounds == 0 {
            return cfg("rounds must be at least 1".into());
        }
        if self.questions_per_round == 0 {
            return cfg("questions_per_round must be at least 1".into());
        }
        if !(self.marker_phi > 0.0 && self.marker_phi <= 1.0) {
            return cfg(format!("marker_phi must lie in (0,1], got {}", self.marker_phi));
        }
        for (name, v) in [
            ("piece_rate_round", self.piece_rate_round),
            ("piece_rate_final", self.piece_rate_final),
            ("bdm_price_cap", self.bdm_price_cap),
            ("confidence_bonus", self.confidence_bonus),
            ("participation_fee", self.participation_fee),
            ("seconds_per_effort", self.seconds_per_effort),
            ("timing_noise_sd", self.timing_noise_sd),
            ("min_effort_seconds", self.min_effort_seconds),
            ("bid_noise_sd", self.bid_noise_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return cfg(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if !(self.perceived_mark_sd > 0.0 && self.perceived_mark_sd.is_finite()) {
            return cfg(format!("perceived_mark_sd must be positive, got {}", self.perceived_mark_sd));
        }
        if self.piece_rate_final <= 0.0 {
            return cfg("piece_rate_final must be positive".into());
        }
        let implied_cap = self.questions_per_round as f64 * self.piece_rate_final;
        if (implied_cap - self.bdm_price_cap).abs() > 1e-9 {
            return cfg(format!(
                "bdm_price_cap ({}) must equal questions_per_round x piece_rate_final ({implied_cap})",
                self.bdm_price_cap
            ));
        }
        Ok(())
    }

    fn questions(&self) -> f64 {
        self.questions_per_round as f64
    }
}

/// Truthful bid: the final-test piece rate times the expected number of correct answers.
pub fn optimal_bid(belief: &BeliefGrid, believed_ability: f64, tech: &Technology, config: &ExperimentConfig) -> Result<f64> {
    let phi = match config.bid_basis {
        BidBasis::FinalTest => 1.0,
        BidBasis::CurrentRound => belief.mean(),
    };
    let effort = model::optimal_effort(tech, believed_ability, phi)?;
    Ok(bid_for_effort(tech, believed_ability, effort, config))
}

fn bid_for_effort(tech: &Technology, believed_ability: f64, effort: f64, config: &ExperimentConfig) -> f64 {
    let expected = tech.production(believed_ability, effort).min(config.questions());
    (config.piece_rate_final * expected).clamp(0.0, config.bdm_price_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Recovery {
    Retained(f64),
    /// Zero bid: the implied score is zero.
    Undefined,
    AboveOne(f64),
}

impl Recovery {
    pub fn value(&self) -> Option<f64> {
        match self {
            Recovery::Retained(v) | Recovery::AboveOne(v) => Some(*v),
            Recovery::Undefined => None,
        }
    }

    pub fn retained(&self) -> Option<f64> {
        match self {
            Recovery::Retained(v) => Some(*v),
            _ => None,
        }
    }
}

/// Belief implied by marks over the bid-implied score.
pub fn recover_phi(mark: f64, bid: f64, config: &ExperimentConfig) -> Result<Recovery> {
    if !(bid >= 0.0 && bid.is_finite()) || !(mark >= 0.0 && mark.is_finite()) {
        return Err(Error::invalid(format!("mark and bid must be finite and nonnegative, got {mark}, {bid}")));
    }
    let implied = bid / config.piece_rate_final;
    if implied == 0.0 {
        return Ok(Recovery::Undefined);
    }
    let phi = mark / implied;
    Ok(if phi > 1.0 { Recovery::AboveOne(phi) } else { Recovery::Retained(phi) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BdmOutcome {
    /// Bid at or above the price; the subject pays the price.
    Win {
        price: f64,
    },
    Lose {
        price: f64,
    },
}

impl BdmOutcome {
    pub fn won(&self) -> bool {
        matches!(self, BdmOutcome::Win { .. })
    }
}

pub fn bdm_resolve(bid: f64, rng: &mut impl Rng, config: &ExperimentConfig) -> BdmOutcome {
    let price = rng.random::<f64>() * config.bdm_price_cap;
    if bid >= price {
        BdmOutcome::Win { price }
    } else {
        BdmOutcome::Lose { price }
    }
}

/// Expected BDM surplus of bidding `bid` when the test is worth `value`.
pub fn expected_bdm_payoff(bid: f64, value: f64, config: &ExperimentConfig) -> f64 {
    let b = bid.clamp(0.0, config.bdm_price_cap);
    (value * b - 0.5 * b * b) / config.bdm_price_cap
}

pub fn classify_confidence(stated_score: u32, actual_score: u32) -> Confidence {
    if stated_score > actual_score {
        Confidence::Overconfident
    } else {
        Confidence::Underconfident
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub effort: f64,
    pub score: u32,
    pub mark: f64,
    pub effort_seconds: f64,
    pub bid: f64,
}

/// One marked round. Returns the outcome and the belief carried into the next round.
pub fn run_round(
    agent: &AgentProfile,
    belief: &BeliefGrid,
    tech: &Technology,
    config: &ExperimentConfig,
    rng: &mut SimRng,
) -> Result<(RoundOutcome, BeliefGrid)> {
    let ab = agent.believed_ability();
    let effort = model::optimal_effort(tech, ab, belief.mean())?;
    let p = (tech.production(agent.true_ability(), effort) / config.questions()).clamp(0.0, 1.0);
    let score =
        Binomial::new(config.questions_per_round as u64, p).map_err(|e| Error::invalid(e.to_string()))?.sample(rng) as u32;
    let mark = score as f64 * config.marker_phi;
    let timing = if config.timing_noise_sd > 0.0 {
        Normal::new(0.0, config.timing_noise_sd).expect("validated sd").sample(rng)
    } else {
        0.0
    };
    let effort_seconds = (config.seconds_per_effort * effort + timing).max(config.min_effort_seconds);

    let bid_effort = match config.bid_basis {
        BidBasis::FinalTest => model::optimal_effort(tech, ab, 1.0)?,
        BidBasis::CurrentRound => effort,
    };
    let mut bid = bid_for_effort(tech, ab, bid_effort, config);
    if config.bid_noise_sd > 0.0 {
        bid = (bid + Normal::new(0.0, config.bid_noise_sd).expect("validated sd").sample(rng)).clamp(0.0, config.bdm_price_cap);
    }

    // A zero score carries no information the subject can act on.
    let next = if score > 0 && effort > 0.0 {
        let observer = Technology { noise_sigma: config.perceived_mark_sd, ..*tech };
        bayes_update(belief, &observer, ab, effort, mark)?
    } else {
        belief.clone()
    };
    Ok((RoundOutcome { effort, score, mark, effort_seconds, bid }, next))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub subject_id: u64,
    pub round: u32,
    pub score: u32,
    pub mark: f64,
    pub bid: f64,
    /// Recovered belief; absent when undefined.
    pub phi_hat: Option<f64>,
    pub effort_seconds: f64,
    /// Stated round-1 score, recorded on the round-1 row only.
    pub stated_score_r1: Option<u32>,
    pub excluded: bool,
}

impl RoundRecord {
    pub fn implied_score(&self, config: &ExperimentConfig) -> f64 {
        self.bid / config.piece_rate_final
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectInfo {
    pub subject_id: u64,
    pub overconfident: bool,
    pub male: bool,
    pub age: u32,
    pub white: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PanelDataset {
    /// Ordered by id.
    pub subjects: Vec<SubjectInfo>,
    /// Ordered by (subject, round).
    pub records: Vec<RoundRecord>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "subject_id",
    "round",
    "score",
    "mark",
    "bid",
    "phi_hat",
    "effort_seconds",
    "overconfident",
    "stated_score_r1",
    "male",
    "age",
    "white",
    "excluded",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    subject_id: u64,
    round: u32,
    score: u32,
    mark: f64,
    bid: f64,
    phi_hat: Option<f64>,
    effort_seconds: f64,
    overconfident: u8,
    stated_score_r1: Option<u32>,
    male: u8,
    age: u32,
    white: u8,
    excluded: u8,
}

fn flag(v: u8, name: &str) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::Data(format!("{name} must be 0 or 1, got {v}"))),
    }
}

impl PanelDataset {
    pub fn subject(&self, id: u64) -> Option<&SubjectInfo> {
        self.subjects.binary_search_by_key(&id, |s| s.subject_id).ok().map(|i| &self.subjects[i])
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.records {
            let s = self.subject(r.subject_id).expect("every record has a subject");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.subject_id,
                r.round,
                r.score,
                r.mark,
                r.bid,
                opt(r.phi_hat.map(|v| v.to_string())),
                r.effort_seconds,
                u8::from(s.overconfident),
                opt(r.stated_score_r1.map(|v| v.to_string())),
                u8::from(s.male),
                s.age,
                u8::from(s.white),
                u8::from(r.excluded),
            ));
        }
        out
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let missing: Vec<String> =
            CSV_COLUMNS.iter().filter(|c| !headers.iter().any(|h| h == **c)).map(|c| c.to_string()).collect();
        if !missing.is_empty() {
            return Err(Error::Schema { missing });
        }
        let mut subjects: Vec<SubjectInfo> = Vec::new();
        let mut records = Vec::new();
        for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
            let info = SubjectInfo {
                subject_id: row.subject_id,
                overconfident: flag(row.overconfident, "overconfident")?,
                male: flag(row.male, "male")?,
                age: row.age,
                white: flag(row.white, "white")?,
            };
            match subjects.iter().find(|s| s.subject_id == row.subject_id) {
                Some(s) if *s != info => {
                    return Err(Error::Data(format!("subject {} has inconsistent attributes", row.subject_id)))
                }
                Some(_) => {}
                None => subjects.push(info),
            }
            records.push(RoundRecord {
                subject_id: row.subject_id,
                round: row.round,
                score: row.score,
                mark: row.mark,
                bid: row.bid,
                phi_hat: row.phi_hat,
                effort_seconds: row.effort_seconds,
                stated_score_r1: row.stated_score_r1,
                excluded: flag(row.excluded, "excluded")?,
            });
        }
        subjects.sort_by_key(|s| s.subject_id);
        records.sort_by_key(|r| (r.subject_id, r.round));
        if records.windows(2).any(|w| (w[0].subject_id, w[0].round) == (w[1].subject_id, w[1].round)) {
            return Err(Error::Data("duplicate (subject, round) rows".into()));
        }
        Ok(Self { subjects, records })
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::from_csv_reader(s.as_bytes())
    }

    /// Retained records as a long panel with numeric columns:
    /// `score, mark, bid, phi_hat, effort, overconfident, male, age, white, round`.
    pub fn analysis_panel(&self) -> LongPanel {
        let rows: Vec<&RoundRecord> = self.records.iter().filter(|r| !r.excluded && r.phi_hat.is_some()).collect();
        let mut p = LongPanel::new(rows.iter().map(|r| r.subject_id).collect(), rows.iter().map(|r| r.round).collect())
            .expect("equal lengths");
        let subj = |r: &RoundRecord| self.subject(r.subject_id).expect("known subject");
        let cols: [(&str, Box<dyn Fn(&RoundRecord) -> f64>); 10] = [
            ("score", Box::new(|r| r.score as f64)),
            ("mark", Box::new(|r| r.mark)),
            ("bid", Box::new(|r| r.bid)),
            ("phi_hat", Box::new(|r| r.phi_hat.unwrap_or(f64::NAN))),
            ("effort", Box::new(|r| r.effort_seconds)),
            ("round", Box::new(|r| r.round as f64)),
            ("overconfident", Box::new(|r| f64::from(u8::from(subj(r).overconfident)))),
            ("male", Box::new(|r| f64::from(u8::from(subj(r).male)))),
            ("age", Box::new(|r| subj(r).age as f64)),
            ("white", Box::new(|r| f64::from(u8::from(subj(r).white)))),
        ];
        for (name, f) in cols {
            p.insert(name, rows.iter().map(|r| f(r)).collect()).expect("lengths match");
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubjectPrior {
    Uniform,
    /// Truncated-normal prior whose centre is drawn uniformly per subject.
    Heterogeneous {
        center_min: f64,
        center_max: f64,
        sd: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBracket {
    pub min: u32,
    pub max: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubjectPopulation {
    pub subjects: usize,
    pub ability_mean: f64,
    pub ability_sd: f64,
    pub ability_min: f64,
    /// Believed minus true ability.
    pub overconfidence_mean: f64,
    pub overconfidence_sd: f64,
    pub believed_min: f64,
    pub prior: SubjectPrior,
    pub male_share: f64,
    pub white_share: f64,
    pub age_brackets: Vec<AgeBracket>,
}

impl Default for SubjectPopulation {
    fn default() -> Self {
        Self {
            subjects: 189,
            ability_mean: 2.9,
            ability_sd: 0.6,
            ability_min: 0.5,
            overconfidence_mean: 3.2,
            overconfidence_sd: 2.75,
            believed_min: 0.5,
            prior: SubjectPrior::Heterogeneous { center_min: 0.8, center_max: 0.95, sd: 0.1 },
            male_share: 101.0 / 189.0,
            white_share: 96.0 / 189.0,
            age_brackets: vec![
                AgeBracket { min: 18, max: 20, weight: 2.0 },
                AgeBracket { min: 21, max: 35, weight: 145.0 },
                AgeBracket { min: 36, max: 50, weight: 29.0 },
                AgeBracket { min: 51, max: 70, weight: 13.0 },
            ],
        }
    }
}

impl SubjectPopulation {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Configuration(m));
        if !(self.ability_min > 0.0 && self.believed_min > 0.0) {
            return cfg("ability floors must be positive".into());
        }
        if !(self.ability_mean.is_finite() && self.overconfidence_mean.is_finite()) {
            return cfg("means must be finite".into());
        }
        if !(self.ability_sd >= 0.0 && self.overconfidence_sd >= 0.0) {
            return cfg("standard deviations must be nonnegative".into());
        }
        for (name, s) in [("male_share", self.male_share), ("white_share", self.white_share)] {
            if !(0.0..=1.0).contains(&s) {
                return cfg(format!("{name} must lie in [0,1], got {s}"));
            }
        }
        if self.age_brackets.is_empty() || self.age_brackets.iter().any(|b| b.min > b.max || !(b.weight > 0.0)) {
            return cfg("age brackets need min <= max and positive weights".into());
        }
        if let SubjectPrior::Heterogeneous { center_min, center_max, sd } = self.prior {
            if !(center_min <= center_max && sd > 0.0) {
                return cfg("prior centres must be ordered and sd positive".into());
            }
        }
        Ok(())
    }
}

fn normal_or_mean(rng: &mut SimRng, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(mean, sd).expect("validated").sample(rng)
    } else {
        mean
    }
}

/// Latent draws for one subject; depends only on the master seed and the id.
pub fn draw_subject(spec: &SubjectPopulation, seed: u64, id: u64) -> Result<(AgentProfile, BeliefGrid, SubjectInfo)> {
    let mut rng = seeds::derived_rng(seed, stream::POPULATION, id);
    let a = normal_or_mean(&mut rng, spec.ability_mean, spec.ability_sd).max(spec.ability_min);
    let ab = (a + normal_or_mean(&mut rng, spec.overconfidence_mean, spec.overconfidence_sd)).max(spec.believed_min);
    let prior = match spec.prior {
        SubjectPrior::Uniform => init_prior(PriorKind::Uniform)?,
        SubjectPrior::Heterogeneous { center_min, center_max, sd } => {
            let c = if center_max > center_min { rng.random_range(center_min..center_max) } else { center_min };
            init_prior(PriorKind::TruncatedNormal { mean: c, sd })?
        }
    };
    let mut demo = seeds::derived_rng(seed, stream::DEMOGRAPHICS, id);
    let male = demo.random::<f64>() < spec.male_share;
    let white = demo.random::<f64>() < spec.white_share;
    let total: f64 = spec.age_brackets.iter().map(|b| b.weight).sum();
    let mut u = demo.random::<f64>() * total;
    let mut bracket = spec.age_brackets[spec.age_brackets.len() - 1];
    for b in &spec.age_brackets {
        if u < b.weight {
            bracket = *b;
            break;
        }
        u -= b.weight;
    }
    let age = demo.random_range(bracket.min..=bracket.max);
    Ok((AgentProfile::new(id, a, ab)?, prior, SubjectInfo { subject_id: id, overconfident: false, male, age, white }))
}

/// All rounds for one subject.
pub fn run_subject(
    agent: &AgentProfile,
    prior: &BeliefGrid,
    mut info: SubjectInfo,
    tech: &Technology,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(SubjectInfo, Vec<RoundRecord>)> {
    let mut rng = seeds::derived_rng(seed, stream::SUBJECT, agent.id);
    let mut belief = prior.clone();
    let mut records = Vec::with_capacity(config.rounds as usize);
    for round in 1..=config.rounds {
        let (out, next) = run_round(agent, &belief, tech, config, &mut rng)?;
        let stated = (round == 1).then(|| {
            (agent.believed_ability() * out.effort.powf(tech.effort_exponent)).round().clamp(0.0, config.questions()) as u32
        });
        if let Some(s) = stated {
            info.overconfident = classify_confidence(s, out.score) == Confidence::Overconfident;
        }
        let rec = recover_phi(out.mark, out.bid, config)?;
        records.push(RoundRecord {
            subject_id: agent.id,
            round,
            score: out.score,
            mark: out.mark,
            bid: out.bid,
            phi_hat: rec.value(),
            effort_seconds: out.effort_seconds,
            stated_score_r1: stated,
            excluded: rec.retained().is_none(),
        });
        belief = next;
    }
    Ok((info, records))
}

/// Latent subject draws alongside the observable panel.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPanel {
    pub data: PanelDataset,
    pub agents: Vec<AgentProfile>,
}

pub fn generate_panel(spec: &SubjectPopulation, config: &ExperimentConfig, tech: &Technology, seed: u64) -> Result<PanelDataset> {
    generate_panel_with(Backend::default(), spec, config, tech, seed).map(|g| g.data)
}

pub fn generate_panel_with(
    backend: Backend,
    spec: &SubjectPopulation,
    config: &ExperimentConfig,
    tech: &Technology,
    seed: u64,
) -> Result<GeneratedPanel> {
    spec.validate()?;
    config.validate()?;
    tech.validate().map_err(|e| Error::Configuration(e.to_string()))?;
    let runs = par::try_map_indexed(backend, spec.subjects, |i| {
        let (agent, prior, info) = draw_subject(spec, seed, i as u64)?;
        let (info, recs) = run_subject(&agent, &prior, info, tech, config, seed)?;
        Ok::<_, Error>((agent, info, recs))
    })?;
    let mut data = PanelDataset::default();
    let mut agents = Vec::with_capacity(runs.len());
    for (agent, info, recs) in runs {
        agents.push(agent);
        data.subjects.push(info);
        data.records.extend(recs);
    }
    Ok(GeneratedPanel { data, agents })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Payoff {
    pub participation_fee: f64,
    pub round_pay: f64,
    pub confidence_bonus: f64,
    pub bdm: BdmOutcome,
    /// Final-test earnings net of the BDM price; zero when the auction is lost.
    pub final_test_net: f64,
    pub total: f64,
}

/// Settle one subject's earnings: one random round's bid goes to the BDM auction.
pub fn settle_payoff(
    agent: &AgentProfile,
    records: &[RoundRecord],
    tech: &Technology,
    config: &ExperimentConfig,
    rng: &mut SimRng,
) -> Result<Payoff> {
    if records.is_empty() {
        return Err(Error::invalid("no rounds to settle"));
    }
    let round_pay = records.iter().map(|r| r.mark).sum::<f64>() * config.piece_rate_round;
    let bonus = records.iter().find(|r| r.round == 1).and_then(|r| r.stated_score_r1.map(|s| s == r.score)).map_or(0.0, |hit| {
        if hit {
            config.confidence_bonus
        } else {
            0.0
        }
    });
    let drawn = &records[rng.random_range(0..records.len())];
    let bdm = bdm_resolve(drawn.bid, rng, config);
    let final_test_net = match bdm {
        BdmOutcome::Win { price } => {
            let e = model::optimal_effort(tech, agent.believed_ability(), 1.0)?;
            let p = (tech.production(agent.true_ability(), e) / config.questions()).clamp(0.0, 1.0);
            let correct = Binomial::new(config.questions_per_round as u64, p)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(rng) as f64;
            correct * config.piece_rate_final - price
        }
        BdmOutcome::Lose { .. } => 0.0,
    };
    Ok(Payoff {
        participation_fee: config.participation_fee,
        round_pay,
        confidence_bonus: bonus,
        bdm,
        final_test_net,
        total: config.participation_fee + round_pay + bonus + final_test_net,
    })
}
