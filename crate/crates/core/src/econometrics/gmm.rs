//! First-difference two-step GMM for the belief-updating model.
//!
//! The level model `y_it = a_i + b*round + g*y_{i,t-1} + u_it` is differenced
//! to `dy_t = b + g*dy_{t-1} + du_t`, where the differenced round is the
//! constant. `dy_{t-1}` is endogenous and instrumented by lagged variables
//! dated `t-2` or earlier.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{dist, panel::LongPanel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Instrument {
    /// `effort_{t-1} - effort_{t-2}`
    LagEffort,
    /// `y_{t-2}` in levels.
    Lag2Dep,
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Instrument::LagEffort => "d.effort(t-1)",
            Instrument::Lag2Dep => "y(t-2)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmmResult {
    /// Drift of the differenced equation: the per-round updating effect.
    pub drift: f64,
    pub drift_se: f64,
    pub drift_p: f64,
    /// Coefficient on the lagged dependent variable.
    pub persistence: f64,
    pub persistence_se: f64,
    pub persistence_p: f64,
    /// First-step (2SLS) estimates `[drift, persistence]`.
    pub first_step: [f64; 2],
    /// Hansen J; `None` when the model is exactly identified.
    pub sargan_j: Option<f64>,
    pub sargan_df: usize,
    pub sargan_p: Option<f64>,
    pub first_stage_f: f64,
    pub first_stage_p: f64,
    pub ar1: f64,
    pub ar1_p: f64,
    /// `None` when no unit has residuals two periods apart.
    pub ar2: Option<f64>,
    pub ar2_p: Option<f64>,
    pub instruments: Vec<Instrument>,
    pub n_obs: usize,
    pub n_units: usize,
}

struct Obs {
    unit: usize,
    period: u32,
    dy: f64,
    dy_lag: f64,
    z: Vec<f64>,
}

fn build_obs(panel: &LongPanel, dep: &str, effort_col: &str, instruments: &[Instrument]) -> Result<Vec<Obs>> {
    let mut needed = vec![dep];
    if instruments.contains(&Instrument::LagEffort) {
        needed.push(effort_col);
    }
    panel.require(&needed)?;
    let y = panel.column(dep)?;
    let effort = if instruments.contains(&Instrument::LagEffort) { Some(panel.column(effort_col)?) } else { None };
    let mut out = Vec::new();
    for (unit, rows) in panel.groups().into_iter().enumerate() {
        let by_period: BTreeMap<u32, usize> = rows.iter().map(|&r| (panel.period[r], r)).collect();
        if by_period.len() != rows.len() {
            return Err(Error::Data(format!("duplicate periods for unit {}", panel.unit[rows[0]])));
        }
        for (&t, &r0) in &by_period {
            if t < 2 {
                continue;
            }
            let (Some(&r1), Some(&r2)) = (by_period.get(&(t - 1)), by_period.get(&(t - 2))) else {
                continue;
            };
            let mut z = vec![1.0];
            for inst in instruments {
                z.push(match inst {
                    Instrument::LagEffort => {
                        let e = effort.expect("checked above");
                        e[r1] - e[r2]
                    }
                    Instrument::Lag2Dep => y[r2],
                });
            }
            out.push(Obs { unit, period: t, dy: y[r0] - y[r1], dy_lag: y[r1] - y[r2], z });
        }
    }
    Ok(out)
}

fn sym_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse()).ok_or(Error::SingularDesign { rank: n.saturating_sub(1), columns: n })
}

/// Two-step GMM on the first-differenced model.
///
/// `effort_col` is read only when [`Instrument::LagEffort`] is requested.
pub fn diff_gmm(panel: &LongPanel, dep: &str, effort_col: &str, instruments: &[Instrument]) -> Result<GmmResult> {
    let mut instruments = instruments.to_vec();
    instruments.sort();
    instruments.dedup();
    let obs = build_obs(panel, dep, effort_col, &instruments)?;
    let n = obs.len();
    let l = instruments.len() + 1;
    let k = 2;
    let n_units = obs.iter().map(|o| o.unit).collect::<std::collections::BTreeSet<_>>().len();
    if instruments.is_empty() || n <= l {
        return Err(Error::Underidentified { instruments: l, regressors: k, observations: n });
    }

    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { obs[i].dy_lag });
    let z = DMatrix::from_fn(n, l, |i, j| obs[i].z[j]);
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.dy));

    let zx = z.transpose() * &x;
    let zy = z.transpose() * &y;
    let rank = zx.clone().svd(false, false).rank(1e-10 * zx.norm().max(f64::MIN_POSITIVE));
    if rank < k {
        return Err(Error::SingularDesign { rank, columns: k });
    }
    let solve = |w: &DMatrix<f64>| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let a = zx.transpose() * w * &zx;
        let a_inv = sym_inverse(&a)?;
        let b = &a_inv * (zx.transpose() * w * &zy);
        Ok((b, a_inv))
    };

    let w1 = sym_inverse(&(z.transpose() * &z))?;
    let (b1, _) = solve(&w1)?;
    let e1 = &y - &x * &b1;

    // Unit-clustered moment covariance from first-step residuals.
    let unit_ranges = unit_ranges(&obs);
    let mut s = DMatrix::zeros(l, l);
    for r in &unit_ranges {
        let g = unit_moment(&z, &e1, r.clone());
        s += &g * g.transpose();
    }
    let w2 = sym_inverse(&s)?;
    let (b2, v2) = solve(&w2)?;
    let e2 = &y - &x * &b2;

    let se = |j: usize| v2[(j, j)].max(0.0).sqrt();
    let p_of = |b: f64, s: f64| if s > 0.0 { dist::normal_two_sided_p(b / s) } else { f64::NAN };

    let sargan_df = l - k;
    let (sargan_j, sargan_p) = if sargan_df == 0 {
        (None, None)
    } else {
        let g = z.transpose() * &e2;
        let j = (g.transpose() * &w2 * &g)[(0, 0)];
        (Some(j), Some(dist::chisq_sf(j, sargan_df as f64)?))
    };

    let (first_stage_f, first_stage_p) = first_stage(&z, &x.column(1).into_owned())?;

    let ar = |lag: u32| -> Result<Option<f64>> { ar_test(&obs, &unit_ranges, &x, &z, &e2, &w2, &v2, lag) };
    let ar1 = ar(1)?.ok_or_else(|| Error::Data("no consecutive residual pairs for the serial-correlation test".into()))?;
    let ar2 = ar(2)?;

    Ok(GmmResult {
        drift: b2[0],
        drift_se: se(0),
        drift_p: p_of(b2[0], se(0)),
        persistence: b2[1],
        persistence_se: se(1),
        persistence_p: p_of(b2[1], se(1)),
        first_step: [b1[0], b1[1]],
        sargan_j,
        sargan_df,
        sargan_p,
        first_stage_f,
        first_stage_p,
        ar1,
        ar1_p: dist::normal_two_sided_p(ar1),
        ar2,
        ar2_p: ar2.map(dist::normal_two_sided_p),
        instruments,
        n_obs: n,
        n_units,
    })
}

fn unit_ranges(obs: &[Obs]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=obs.len() {
        if i == obs.len() || obs[i].unit != obs[start].unit {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn unit_moment(z: &DMatrix<f64>, e: &DVector<f64>, rows: std::ops::Range<usize>) -> DVector<f64> {
    let mut g = DVector::zeros(z.ncols());
    for i in rows {
        g += z.row(i).transpose() * e[i];
    }
    g
}

/// Reduced-form F for the endogenous regressor against a constant-only model.
fn first_stage(z: &DMatrix<f64>, endog: &DVector<f64>) -> Result<(f64, f64)> {
    let n = z.nrows();
    let l = z.ncols();
    let fit = super::least_squares(endog, z)?;
    let ssr_u = fit.residuals.norm_squared();
    let m = endog.mean();
    let ssr_r: f64 = endog.iter().map(|v| (v - m).powi(2)).sum();
    let q = (l - 1) as f64;
    let df = (n - l) as f64;
    if ssr_u <= 0.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let f = ((ssr_r - ssr_u) / q) / (ssr_u / df);
    Ok((f, dist::f_sf(f, q, df)?))
}

/// Arellano–Bond test for serial correlation of order `lag` in differenced residuals.
#[allow(clippy::too_many_arguments)]
fn ar_test(
    obs: &[Obs],
    units: &[std::ops::Range<usize>],
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    e: &DVector<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    lag: u32,
) -> Result<Option<f64>> {
    let k = x.ncols();
    let l = z.ncols();
    let mut num = 0.0;
    let mut sum_sq = 0.0;
    let mut e_lag_x = DVector::<f64>::zeros(k);
    let mut z_e_w = DVector::<f64>::zeros(l);
    let mut pairs = 0;
    for r in units {
        let mut w_i = 0.0;
        for cur in r.clone() {
            let Some(prev) = r.clone().find(|&j| obs[j].period + lag == obs[cur].period) else {
                continue;
            };
            w_i += e[prev] * e[cur];
            e_lag_x += x.row(cur).transpose() * e[prev];
            pairs += 1;
        }
        num += w_i;
        sum_sq += w_i * w_i;
        if w_i != 0.0 {
            z_e_w += unit_moment(z, e, r.clone()) * w_i;
        }
    }
    if pairs == 0 {
        return Ok(None);
    }
    let xz = x.transpose() * z;
    let middle = (e_lag_x.transpose() * v * &xz * w * &z_e_w)[(0, 0)];
    let last = (e_lag_x.transpose() * v * &e_lag_x)[(0, 0)];
    let var = sum_sq - 2.0 * middle + last;
    if var <= 0.0 {
        return Err(Error::Data(format!("non-positive variance in order-{lag} serial-correlation test")));
    }
    Ok(Some(num / var.sqrt()))
}
