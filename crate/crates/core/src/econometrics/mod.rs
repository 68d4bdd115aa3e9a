//! Estimators and tests used on experiment panels.

pub mod dist;
pub mod gmm;
pub mod kde;
pub mod panel;
pub mod table;
pub mod ttest;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

pub use gmm::{diff_gmm, GmmResult, Instrument};
pub use kde::{kde, Bandwidth, KdeCurve};
pub use panel::{hausman, random_effects, variance_target, within_fe, HausmanResult, LongPanel, VarianceMode};
pub use ttest::{paired_t_one_sided, Alternative, TTestResult};

pub const INTERCEPT: &str = "const";

/// Relative size below which a pivot in R marks the design as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n_obs: usize,
    pub df_resid: usize,
    pub sigma2: f64,
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Regressors removed because they carry no variation (e.g. absorbed by unit effects).
    pub dropped: Vec<String>,
    /// Units removed before estimation (single-observation units in FE).
    pub dropped_units: usize,
    pub notes: Vec<String>,
}

impl RegressionResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.std_errors[i])
    }

    pub fn p(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.p_values[i])
    }
}

pub(crate) struct LsFit {
    pub coefficients: DVector<f64>,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
    pub residuals: DVector<f64>,
}

/// Least squares through a thin QR factorisation.
pub(crate) fn least_squares(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<LsFit> {
    let (n, k) = x.shape();
    if k == 0 {
        return Ok(LsFit { coefficients: DVector::zeros(0), xtx_inv: DMatrix::zeros(0, 0), residuals: y.clone() });
    }
    if n < k {
        return Err(Error::SingularDesign { rank: n, columns: k });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..k).filter(|&i| r[(i, i)].abs() > RANK_TOLERANCE * max_diag.max(f64::MIN_POSITIVE)).count();
    if rank < k || max_diag == 0.0 {
        return Err(Error::SingularDesign { rank, columns: k });
    }
    let qty = qr.q().transpose() * y;
    let coefficients = r.solve_upper_triangular(&qty).ok_or(Error::SingularDesign { rank, columns: k })?;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).ok_or(Error::SingularDesign { rank, columns: k })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coefficients;
    Ok(LsFit { coefficients, xtx_inv, residuals })
}

pub(crate) fn design(columns: &[&[f64]], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i])
}

/// Classical inference around a least-squares fit.
pub(crate) fn finish_regression(
    names: Vec<String>,
    y: &DVector<f64>,
    fit: LsFit,
    df_resid: usize,
    centered_tss: bool,
    n_params_for_adj: usize,
) -> Result<RegressionResult> {
    let n = y.len();
    let ssr = fit.residuals.norm_squared();
    // An exact fit (n == k) keeps its coefficients but has no sampling variance estimate.
    let sigma2 = if df_resid == 0 { f64::NAN } else { ssr / df_resid as f64 };
    let covariance = &fit.xtx_inv * sigma2;
    let tss = if centered_tss {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let r_squared = if tss > 0.0 { 1.0 - ssr / tss } else { 1.0 };
    let adj_r_squared = if n > n_params_for_adj && df_resid > 0 && tss > 0.0 {
        1.0 - (1.0 - r_squared) * ((n - 1) as f64 / df_resid as f64)
    } else {
        r_squared
    };
    let k = names.len();
    let mut std_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        let se = if df_resid == 0 { f64::NAN } else { covariance[(j, j)].max(0.0).sqrt() };
        let t = if se > 0.0 { fit.coefficients[j] / se } else { f64::NAN };
        let p = if t.is_finite() {
            (2.0 * dist::student_t_sf(t.abs(), df_resid as f64)?).min(1.0)
        } else if se == 0.0 {
            0.0
        } else {
            f64::NAN
        };
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(p);
    }
    Ok(RegressionResult {
        names,
        coefficients: fit.coefficients.iter().copied().collect(),
        std_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        n_obs: n,
        df_resid,
        sigma2,
        covariance,
        residuals: fit.residuals.iter().copied().collect(),
        dropped: Vec::new(),
        dropped_units: 0,
        notes: if df_resid == 0 {
            vec!["exact fit: no residual degrees of freedom, standard errors undefined".into()]
        } else {
            Vec::new()
        },
    })
}

/// Ordinary least squares with classical standard errors.
///
/// `x` holds named regressor columns; the intercept, when requested, is
/// prepended under the name [`INTERCEPT`].
pub fn ols(y: &[f64], x: &[(&str, &[f64])], include_intercept: bool) -> Result<RegressionResult> {
    let n = y.len();
    if let Some((name, _)) = x.iter().find(|(_, c)| c.len() != n) {
        return Err(Error::invalid(format!("column {name} length differs from y ({n})")));
    }
    if y.iter().chain(x.iter().flat_map(|(_, c)| c.iter())).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression data must be finite"));
    }
    let ones = vec![1.0; n];
    let mut names = Vec::new();
    let mut cols: Vec<&[f64]> = Vec::new();
    if include_intercept {
        names.push(INTERCEPT.to_string());
        cols.push(&ones);
    }
    for (name, c) in x {
        names.push(name.to_string());
        cols.push(c);
    }
    let k = cols.len();
    if n < k {
        return Err(Error::SingularDesign { rank: n, columns: k });
    }
    let xm = design(&cols, n);
    let yv = DVector::from_column_slice(y);
    let fit = least_squares(&yv, &xm)?;
    finish_regression(names, &yv, fit, n - k, include_intercept, k)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x1: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x2: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 1.5 - 2.0 * a + 0.25 * b).collect();
        let r = ols(&y, &[("x1", &x1), ("x2", &x2)], true).unwrap();
        assert!((r.coef("const").unwrap() - 1.5).abs() < 1e-10);
        assert!((r.coef("x1").unwrap() + 2.0).abs() < 1e-10);
        assert!((r.coef("x2").unwrap() - 0.25).abs() < 1e-10);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_points() {
        let r = ols(&[1.0, 3.0], &[("x", &[0.0, 1.0])], true).unwrap();
        assert!((r.coef("const").unwrap() - 1.0).abs() < 1e-12);
        assert!((r.coef("x").unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.df_resid, 0);
        assert!(r.se("x").unwrap().is_nan());
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let x1: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = (0..10).map(|i| (i % 3) as f64).collect();
        assert!(matches!(ols(&y, &[("a", &x1), ("b", &x2)], true), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn overconfidence_gap_recovered_in_monte_carlo() {
        // Table-2-shaped DGP: phi_1 = 0.757 - 0.4422 * over + controls + noise.
        let truth = -0.4422;
        let reps = 200;
        let est: Vec<f64> = (0..reps)
            .map(|rep| {
                let mut rng = seeds::derived_rng(77, 0, rep);
                let noise = Normal::new(0.0, 0.26).unwrap();
                let n = 189;
                let over: Vec<f64> = (0..n).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 }).collect();
                let male: Vec<f64> = (0..n).map(|i| ((i / 2) % 2) as f64).collect();
                let age: Vec<f64> = (0..n).map(|i| 20.0 + (i % 37) as f64).collect();
                let y: Vec<f64> =
                    (0..n).map(|i| 0.6 + truth * over[i] - 0.02 * male[i] + 0.004 * age[i] + noise.sample(&mut rng)).collect();
                ols(&y, &[("over", &over), ("male", &male), ("age", &age)], true).unwrap().coef("over").unwrap()
            })
            .collect();
        let m = mean(&est);
        let mc_se = sample_sd(&est) / (reps as f64).sqrt();
        assert!((m - truth).abs() < 2.0 * mc_se, "mean {m}, mc se {mc_se}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn residuals_orthogonal_to_regressors(seed in 0u64..10_000, n in 8usize..60) {
            let mut rng = seeds::rng_from(seed);
            let nd = Normal::new(0.0, 1.0).unwrap();
            let x1: Vec<f64> = (0..n).map(|_| nd.sample(&mut rng)).collect();
            let x2: Vec<f64> = (0..n).map(|_| 10.0 * nd.sample(&mut rng) + 3.0).collect();
            let y: Vec<f64> = (0..n).map(|i| 2.0 * x1[i] - x2[i] + nd.sample(&mut rng)).collect();
            let r = ols(&y, &[("x1", &x1), ("x2", &x2)], true).unwrap();
            for col in [vec![1.0; n], x1.clone(), x2.clone()] {
                let dot: f64 = col.iter().zip(&r.residuals).map(|(a, b)| a * b).sum();
                let scale: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt() * r.residuals.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(dot.abs() <= 1e-8 * scale.max(1.0));
            }
            prop_assert!(r.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
