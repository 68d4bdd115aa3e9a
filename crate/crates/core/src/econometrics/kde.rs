//! Gaussian kernel density estimates on a regular grid.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const GRID_POINTS: usize = 512;
/// The grid extends this many bandwidths beyond the data range.
const GRID_PAD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl KdeCurve {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        self.x.windows(2).zip(self.density.windows(2)).map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1])).sum()
    }

    pub fn eval(&self, at: f64, values: &[f64]) -> f64 {
        density_at(at, values, self.bandwidth)
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb. Falls back to whichever of the standard deviation
/// and scaled IQR is positive, and to `0.1` for constant samples.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = super::sample_sd(values);
    let iqr = (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)) / 1.34;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tiny = 1e-12 * scale;
    let spread = match (sd > tiny, iqr > tiny) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => return 0.1,
    };
    0.9 * spread * n.powf(-0.2)
}

fn density_at(x: f64, values: &[f64], h: f64) -> f64 {
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    values.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm
}

pub fn kde(values: &[f64], bandwidth: Bandwidth) -> Result<KdeCurve> {
    if values.len() < 2 {
        return Err(Error::invalid("kernel density needs at least two values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel density values must be finite"));
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(values),
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - GRID_PAD * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + GRID_PAD * h;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let x: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let density = x.iter().map(|&g| density_at(g, values, h)).collect();
    Ok(KdeCurve { bandwidth: h, x, density })
}
