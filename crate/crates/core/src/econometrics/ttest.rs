//! One-sided paired t-tests.

use std::fmt;

use serde::Serialize;

use super::dist;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alternative {
    /// `mean(after - before) < 0`
    Less,
    /// `mean(after - before) > 0`
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub mean_difference: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

impl fmt::Display for TTestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, p-value: {:.3})", self.mean_difference, self.p_value)
    }
}

/// Paired test on `after - before`.
///
/// Identical vectors give `t = 0, p = 1/2`; differences that are constant but
/// nonzero have no sampling variance and are reported as a degenerate test.
pub fn paired_t_one_sided(before: &[f64], after: &[f64], alternative: Alternative) -> Result<TTestResult> {
    if before.len() != after.len() {
        return Err(Error::invalid(format!("paired samples differ in length ({} vs {})", before.len(), after.len())));
    }
    let n = before.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = before.iter().zip(after).map(|(b, a)| a - b).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("paired samples must be finite"));
    }
    let df = n - 1;
    // Rounding in the mean would hide an exactly constant difference.
    if d.iter().all(|v| *v == d[0]) {
        let mean = d[0];
        if mean == 0.0 {
            return Ok(TTestResult { mean_difference: 0.0, t: 0.0, df, p_value: 0.5 });
        }
        return Err(Error::DegenerateTest(format!("paired differences have zero variance (mean {mean})")));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = mean / (var / n as f64).sqrt();
    let p_value = match alternative {
        Alternative::Less => dist::student_t_cdf(t, df as f64)?,
        Alternative::Greater => dist::student_t_sf(t, df as f64)?,
    };
    Ok(TTestResult { mean_difference: mean, t, df, p_value })
}
