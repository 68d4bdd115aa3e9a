//! Output technology, agents and the surprise function.
//!
//! Gross output is `f(a, e) = a * e^alpha` correct answers, effort costs
//! `c(e) = kappa * e^beta`, and an agent who believes the marker passes a
//! share `phi` of correct answers expects the payoff `phi * f(a~, e) - c(e)`.
//! With `0 < alpha < 1 < beta` the optimum is unique and interior.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Technology {
    /// Exponent on effort in the production function, in (0, 1).
    pub effort_exponent: f64,
    /// Exponent of the effort cost, > 1.
    pub cost_exponent: f64,
    pub cost_scale: f64,
    /// Standard deviation of additive output noise (output units). Zero means noise-free.
    pub noise_sigma: f64,
    /// Upper end of the effort search bracket.
    pub max_effort: f64,
}

impl Default for Technology {
    fn default() -> Self {
        Self { effort_exponent: 0.5, cost_exponent: 2.0, cost_scale: 0.5, noise_sigma: 0.35, max_effort: 100.0 }
    }
}

impl Technology {
    pub fn validate(&self) -> Result<()> {
        let Self { effort_exponent: alpha, cost_exponent: beta, cost_scale: kappa, noise_sigma: sigma, max_effort } = *self;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("effort_exponent {alpha} outside (0,1)")));
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("cost_exponent {beta} must exceed 1")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!("cost_scale {kappa} must be positive")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("noise_sigma {sigma} must be nonnegative")));
        }
        if !(max_effort > 0.0 && max_effort.is_finite()) {
            return Err(Error::invalid(format!("max_effort {max_effort} must be positive")));
        }
        Ok(())
    }

    /// Same technology with the noise switched off.
    pub fn noiseless(&self) -> Self {
        Self { noise_sigma: 0.0, ..*self }
    }

    /// `f(a, e)`: correct answers produced before any marking.
    pub fn production(&self, ability: f64, effort: f64) -> f64 {
        if effort <= 0.0 {
            return 0.0;
        }
        ability * effort.powf(self.effort_exponent)
    }

    pub fn cost(&self, effort: f64) -> f64 {
        if effort <= 0.0 {
            return 0.0;
        }
        self.cost_scale * effort.powf(self.cost_exponent)
    }

    /// Marginal payoff `phi * f_e(a, e) - c'(e)`; zero at the optimum.
    pub fn marginal_payoff(&self, ability: f64, phi: f64, effort: f64) -> f64 {
        let (alpha, beta) = (self.effort_exponent, self.cost_exponent);
        phi * ability * alpha * effort.powf(alpha - 1.0) - self.cost_scale * beta * effort.powf(beta - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Confidence {
    Overconfident,
    /// Includes agents whose belief about their ability is exactly right.
    Underconfident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: u64,
    true_ability: f64,
    believed_ability: f64,
}

impl AgentProfile {
    pub fn new(id: u64, true_ability: f64, believed_ability: f64) -> Result<Self> {
        check_positive("true_ability", true_ability)?;
        check_positive("believed_ability", believed_ability)?;
        Ok(Self { id, true_ability, believed_ability })
    }

    pub fn true_ability(&self) -> f64 {
        self.true_ability
    }

    pub fn believed_ability(&self) -> f64 {
        self.believed_ability
    }

    pub fn classification(&self) -> Confidence {
        if self.believed_ability > self.true_ability {
            Confidence::Overconfident
        } else {
            Confidence::Underconfident
        }
    }

    /// Confidence gap `a - a~`; positive for strictly underconfident agents.
    pub fn delta(&self) -> f64 {
        self.true_ability - self.believed_ability
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

/// Beliefs about the marker live in [0, 1].
pub fn clamp_phi(phi: f64) -> f64 {
    phi.clamp(0.0, 1.0)
}

/// Myopically optimal effort for an agent with believed ability `believed_ability`
/// who thinks the marker passes a share `phi_belief` of correct answers.
///
/// Closed form `(phi * a~ * alpha / (kappa * beta))^(1 / (beta - alpha))`,
/// capped at `max_effort`.
pub fn optimal_effort(tech: &Technology, believed_ability: f64, phi_belief: f64) -> Result<f64> {
    check_positive("believed_ability", believed_ability)?;
    check_finite("phi_belief", phi_belief)?;
    let phi = clamp_phi(phi_belief);
    Ok(optimal_effort_unchecked(tech, believed_ability, phi))
}

pub(crate) fn optimal_effort_unchecked(tech: &Technology, believed_ability: f64, phi: f64) -> f64 {
    if phi <= 0.0 {
        return 0.0;
    }
    let (alpha, beta, kappa) = (tech.effort_exponent, tech.cost_exponent, tech.cost_scale);
    let e = (phi * believed_ability * alpha / (kappa * beta)).powf(1.0 / (beta - alpha));
    e.min(tech.max_effort)
}

/// Golden-section maximisation of the expected payoff over `[0, max_effort]`.
///
/// Independent of the closed form; used to cross-check it.
pub fn optimal_effort_numeric(tech: &Technology, believed_ability: f64, phi_belief: f64) -> Result<f64> {
    check_positive("believed_ability", believed_ability)?;
    check_finite("phi_belief", phi_belief)?;
    let phi = clamp_phi(phi_belief);
    let payoff = |e: f64| phi * tech.production(believed_ability, e) - tech.cost(e);
    Ok(golden_section_max(payoff, 0.0, tech.max_effort, 1e-12))
}

pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..500 {
        if hi - lo <= tol * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// The agent's subjective payoff `phi~ * f(a~, e) - c(e)`.
pub fn expected_output(tech: &Technology, believed_ability: f64, phi_belief: f64, effort: f64) -> Result<f64> {
    check_finite("believed_ability", believed_ability)?;
    check_finite("phi_belief", phi_belief)?;
    check_finite("effort", effort)?;
    if effort < 0.0 {
        return Err(Error::invalid(format!("effort must be nonnegative, got {effort}")));
    }
    Ok(clamp_phi(phi_belief) * tech.production(believed_ability, effort) - tech.cost(effort))
}

/// Realised payoff `phi * f(a, e) - c(e) + noise`, with the noise drawn by the caller.
pub fn realized_output(tech: &Technology, true_ability: f64, phi_true: f64, effort: f64, noise_draw: f64) -> Result<f64> {
    check_finite("noise_draw", noise_draw)?;
    Ok(expected_output(tech, true_ability, phi_true, effort)? + noise_draw)
}

/// Correct answers `f(a, e)` before the marker acts.
pub fn gross_score(tech: &Technology, ability: f64, effort: f64) -> f64 {
    tech.production(ability, effort)
}

/// Mean surprise at the effort the agent chooses under belief `phi_belief`:
/// realised minus expected output. Costs cancel because effort is common.
pub fn surprise(tech: &Technology, agent: &AgentProfile, phi_true: f64, phi_belief: f64) -> Result<f64> {
    check_finite("phi_true", phi_true)?;
    let effort = optimal_effort(tech, agent.believed_ability(), phi_belief)?;
    Ok(surprise_at(tech, agent, phi_true, clamp_phi(phi_belief), effort))
}

pub(crate) fn surprise_at(tech: &Technology, agent: &AgentProfile, phi_true: f64, phi_belief: f64, effort: f64) -> f64 {
    phi_true * tech.production(agent.true_ability(), effort) - phi_belief * tech.production(agent.believed_ability(), effort)
}
