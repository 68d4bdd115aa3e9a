//! Berk–Nash equilibrium beliefs.
//!
//! An equilibrium pairs a belief `phi` with the effort that is optimal under
//! it, such that the agent's mean surprise at that effort is zero. The solver
//! bisects the surprise function on `(0, 1]`; if the surprise is still
//! positive at `phi = 1` the agent ends on the boundary.

use serde::Serialize;

use crate::model::{optimal_effort_unchecked, surprise_at, AgentProfile, Technology};
use crate::{Error, Result};

pub const GAMMA_TOLERANCE: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 200;
/// Residual bound a verified interior equilibrium must meet.
pub const VERIFY_TOLERANCE: f64 = 1e-8;

const PHI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub phi_limit: f64,
    pub effort_limit: f64,
    /// Set when no interior root exists and the belief is pinned at 1.
    pub boundary: bool,
    pub gamma_residual: f64,
    /// Marginal subjective payoff at `effort_limit`; zero at an interior optimum.
    pub foc_residual: f64,
}

/// Surprise at belief `phi`, evaluated at the effort optimal under `phi`.
pub fn gamma(tech: &Technology, agent: &AgentProfile, phi_true: f64, phi: f64) -> f64 {
    let effort = optimal_effort_unchecked(tech, agent.believed_ability(), phi);
    surprise_at(tech, agent, phi_true, phi, effort)
}

pub fn solve_equilibrium(tech: &Technology, agent: &AgentProfile, phi_true: f64) -> Result<Equilibrium> {
    if !(phi_true > 0.0 && phi_true <= 1.0) {
        return Err(Error::invalid(format!("phi_true must lie in (0,1], got {phi_true}")));
    }
    let g = |phi: f64| gamma(tech, agent, phi_true, phi);

    let g_hi = g(1.0);
    if g_hi > 0.0 {
        return Ok(build(tech, agent, 1.0, g_hi, true));
    }
    if g_hi == 0.0 {
        return Ok(build(tech, agent, 1.0, 0.0, false));
    }

    // Gamma > 0 just above zero, < 0 at one.
    let (mut lo, mut hi) = (PHI_FLOOR, 1.0);
    let mut mid = 0.5 * (lo + hi);
    let mut g_mid = g(mid);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        g_mid = g(mid);
        if g_mid == 0.0 || (g_mid.abs() < GAMMA_TOLERANCE && hi - lo < 1e-12) {
            break;
        }
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(build(tech, agent, mid, g_mid, false))
}

fn build(tech: &Technology, agent: &AgentProfile, phi: f64, gamma_residual: f64, boundary: bool) -> Equilibrium {
    let effort = optimal_effort_unchecked(tech, agent.believed_ability(), phi);
    Equilibrium {
        phi_limit: phi,
        effort_limit: effort,
        boundary,
        gamma_residual,
        foc_residual: tech.marginal_payoff(agent.believed_ability(), phi, effort),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerificationStatus {
    Pass,
    PassBoundary,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    pub status: VerificationStatus,
    /// Recomputed surprise at the reported belief.
    pub gamma_residual: f64,
    /// Gap between the reported effort and the effort optimal under the reported belief.
    pub effort_residual: f64,
    pub foc_residual: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.status != VerificationStatus::Fail
    }
}

/// Recompute both equilibrium conditions from scratch: optimal effort given the
/// belief, and zero surprise (or, on the boundary, nonnegative surprise at 1).
pub fn verify_equilibrium(eq: &Equilibrium, tech: &Technology, agent: &AgentProfile, phi_true: f64) -> VerificationReport {
    let optimal = optimal_effort_unchecked(tech, agent.believed_ability(), eq.phi_limit);
    let effort_residual = eq.effort_limit - optimal;
    let gamma_residual = surprise_at(tech, agent, phi_true, eq.phi_limit, eq.effort_limit);
    let foc_residual = tech.marginal_payoff(agent.believed_ability(), eq.phi_limit, eq.effort_limit);

    let scale = 1.0 + optimal.abs();
    let optimal_ok = effort_residual.abs() <= VERIFY_TOLERANCE * scale;
    let status = if !optimal_ok {
        VerificationStatus::Fail
    } else if eq.boundary {
        if eq.phi_limit == 1.0 && gamma_residual >= 0.0 {
            VerificationStatus::PassBoundary
        } else {
            VerificationStatus::Fail
        }
    } else if gamma_residual.abs() <= VERIFY_TOLERANCE {
        VerificationStatus::Pass
    } else {
        VerificationStatus::Fail
    };
    VerificationReport { status, gamma_residual, effort_residual, foc_residual }
}
