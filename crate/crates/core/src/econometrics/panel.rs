//! Long-format panels, within / random-effects estimators and the Hausman test.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::{design, dist, finish_regression, least_squares, RegressionResult, INTERCEPT};
use crate::{Error, Result};

/// A panel in long format: one row per (unit, period) with named numeric columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LongPanel {
    pub unit: Vec<u64>,
    pub period: Vec<u32>,
    columns: BTreeMap<String, Vec<f64>>,
}

impl LongPanel {
    pub fn new(unit: Vec<u64>, period: Vec<u32>) -> Result<Self> {
        if unit.len() != period.len() {
            return Err(Error::invalid("unit and period lengths differ"));
        }
        Ok(Self { unit, period, columns: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.unit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(Error::invalid(format!("column {name} has {} rows, panel has {}", values.len(), self.len())));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(name, values)?;
        Ok(self)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| Error::Schema { missing: vec![name.to_string()] })
    }

    pub fn require(&self, names: &[&str]) -> Result<()> {
        let missing: Vec<String> = names.iter().filter(|n| !self.columns.contains_key(**n)).map(|n| n.to_string()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema { missing })
        }
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    /// Rows where `keep` is true.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        Self {
            unit: idx.iter().map(|&i| self.unit[i]).collect(),
            period: idx.iter().map(|&i| self.period[i]).collect(),
            columns: self.columns.iter().map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i]).collect())).collect(),
        }
    }

    /// Row indices grouped by unit, in first-seen unit order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<u64> = Vec::new();
        let mut map: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, &u) in self.unit.iter().enumerate() {
            map.entry(u).or_insert_with(|| {
                order.push(u);
                Vec::new()
            });
            map.get_mut(&u).expect("inserted").push(i);
        }
        order.into_iter().map(|u| map.remove(&u).expect("present")).collect()
    }
}

fn unit_means(values: &[f64], groups: &[Vec<usize>]) -> Vec<f64> {
    groups.iter().map(|g| g.iter().map(|&i| values[i]).sum::<f64>() / g.len() as f64).collect()
}

fn demean(values: &[f64], groups: &[Vec<usize>], means: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for (g, m) in groups.iter().zip(means) {
        for &i in g {
            out[i] = values[i] - m;
        }
    }
    out
}

struct WithinData {
    groups: Vec<Vec<usize>>,
    y: Vec<f64>,
    x_names: Vec<String>,
    x: Vec<Vec<f64>>,
    dropped: Vec<String>,
    dropped_units: usize,
}

fn within_transform(panel: &LongPanel, y: &str, x_vars: &[&str]) -> Result<WithinData> {
    let mut required = vec![y];
    required.extend_from_slice(x_vars);
    panel.require(&required)?;

    let all_groups = panel.groups();
    let dropped_units = all_groups.iter().filter(|g| g.len() < 2).count();
    let kept: Vec<&Vec<usize>> = all_groups.iter().filter(|g| g.len() >= 2).collect();
    // Re-index rows of the retained units contiguously.
    let rows: Vec<usize> = kept.iter().flat_map(|g| g.iter().copied()).collect();
    let mut groups = Vec::with_capacity(kept.len());
    let mut pos = 0;
    for g in &kept {
        groups.push((pos..pos + g.len()).collect::<Vec<_>>());
        pos += g.len();
    }
    let pick = |col: &[f64]| rows.iter().map(|&i| col[i]).collect::<Vec<f64>>();

    let y_raw = pick(panel.column(y)?);
    let y_dm = demean(&y_raw, &groups, &unit_means(&y_raw, &groups));
    let mut x_names = Vec::new();
    let mut x = Vec::new();
    let mut dropped = Vec::new();
    for name in x_vars {
        let raw = pick(panel.column(name)?);
        let dm = demean(&raw, &groups, &unit_means(&raw, &groups));
        let scale = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = dm.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-9 * scale.max(1.0) {
            dropped.push(name.to_string());
        } else {
            x_names.push(name.to_string());
            x.push(dm);
        }
    }
    Ok(WithinData { groups, y: y_dm, x_names, x, dropped, dropped_units })
}

/// Within (fixed-effects) estimator.
///
/// Units with a single observation are dropped and counted; regressors that
/// are constant within every unit are absorbed and listed in `dropped`.
pub fn within_fe(panel: &LongPanel, y: &str, x_vars: &[&str]) -> Result<RegressionResult> {
    let w = within_transform(panel, y, x_vars)?;
    let n = w.y.len();
    let n_units = w.groups.len();
    let k = w.x.len();
    if n_units == 0 {
        return Err(Error::invalid("no unit has two or more observations"));
    }
    if n <= n_units + k {
        return Err(Error::SingularDesign { rank: n.saturating_sub(n_units), columns: k });
    }
    let cols: Vec<&[f64]> = w.x.iter().map(Vec::as_slice).collect();
    let xm = design(&cols, n);
    let yv = DVector::from_column_slice(&w.y);
    let fit = least_squares(&yv, &xm)?;
    let mut res = finish_regression(w.x_names, &yv, fit, n - n_units - k, false, k)?;
    // Within R^2 uses the demeaned total sum of squares (y is already demeaned).
    res.dropped = w.dropped;
    res.dropped_units = w.dropped_units;
    if res.dropped_units > 0 {
        res.notes.push(format!("{} single-observation units dropped", res.dropped_units));
    }
    for d in &res.dropped {
        res.notes.push(format!("{d} absorbed by unit effects"));
    }
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceComponents {
    pub sigma2_e: f64,
    pub sigma2_u: f64,
    /// Set when the between-based estimate of `sigma2_u` was negative and floored at zero.
    pub floored: bool,
}

/// Random-effects FGLS with Swamy–Arora variance components.
///
/// An intercept is always included. Returns the quasi-demeaned regression;
/// the variance components are reported in `notes` and via
/// [`random_effects_components`].
pub fn random_effects(panel: &LongPanel, y: &str, x_vars: &[&str]) -> Result<RegressionResult> {
    random_effects_full(panel, y, x_vars).map(|(r, _)| r)
}

pub fn random_effects_components(panel: &LongPanel, y: &str, x_vars: &[&str]) -> Result<VarianceComponents> {
    random_effects_full(panel, y, x_vars).map(|(_, c)| c)
}

fn random_effects_full(panel: &LongPanel, y: &str, x_vars: &[&str]) -> Result<(RegressionResult, VarianceComponents)> {
    let mut required = vec![y];
    required.extend_from_slice(x_vars);
    panel.require(&required)?;
    let n = panel.len();
    let groups = panel.groups();
    let n_units = groups.len();
    let k = x_vars.len();

    // Idiosyncratic variance from the within regression.
    let w = within_transform(panel, y, x_vars)?;
    let nw = w.y.len();
    let kw = w.x.len();
    let sigma2_e = if nw > w.groups.len() + kw {
        let cols: Vec<&[f64]> = w.x.iter().map(Vec::as_slice).collect();
        let fit = least_squares(&DVector::from_column_slice(&w.y), &design(&cols, nw))?;
        fit.residuals.norm_squared() / (nw - w.groups.len() - kw) as f64
    } else {
        return Err(Error::invalid("too few repeated observations for the within variance"));
    };

    // Between regression on unit means.
    if n_units <= k + 1 {
        return Err(Error::SingularDesign { rank: n_units, columns: k + 1 });
    }
    let y_all = panel.column(y)?;
    let y_bar = unit_means(y_all, &groups);
    let x_bar: Vec<Vec<f64>> = x_vars.iter().map(|v| Ok(unit_means(panel.column(v)?, &groups))).collect::<Result<_>>()?;
    let ones = vec![1.0; n_units];
    let mut bcols: Vec<&[f64]> = vec![&ones];
    bcols.extend(x_bar.iter().map(Vec::as_slice));
    // Regressors without between variation (e.g. round in a balanced panel) are
    // collinear with the constant here, so project with a rank-revealing SVD.
    let bx = design(&bcols, n_units);
    let by = DVector::from_column_slice(&y_bar);
    let svd = bx.clone().svd(true, true);
    let eps = 1e-10 * svd.singular_values.max();
    let b_rank = svd.rank(eps);
    let b_coef = svd.solve(&by, eps).map_err(|e| Error::invalid(e.to_string()))?;
    if n_units <= b_rank {
        return Err(Error::SingularDesign { rank: n_units, columns: b_rank });
    }
    let sigma2_b = (&by - &bx * b_coef).norm_squared() / (n_units - b_rank) as f64;
    let t_harmonic = n_units as f64 / groups.iter().map(|g| 1.0 / g.len() as f64).sum::<f64>();
    let raw_u = sigma2_b - sigma2_e / t_harmonic;
    let floored = raw_u < 0.0;
    let sigma2_u = raw_u.max(0.0);

    // Quasi-demeaning.
    let mut theta = vec![0.0; n];
    for g in &groups {
        let ti = g.len() as f64;
        let th = 1.0 - (sigma2_e / (ti * sigma2_u + sigma2_e)).sqrt();
        for &i in g {
            theta[i] = th;
        }
    }
    let mut unit_of_row = vec![0usize; n];
    for (gi, g) in groups.iter().enumerate() {
        for &i in g {
            unit_of_row[i] = gi;
        }
    }
    let y_star: Vec<f64> = (0..n).map(|i| y_all[i] - theta[i] * y_bar[unit_of_row[i]]).collect();
    let c_star: Vec<f64> = (0..n).map(|i| 1.0 - theta[i]).collect();
    let mut x_star = Vec::with_capacity(k);
    for (j, v) in x_vars.iter().enumerate() {
        let col = panel.column(v)?;
        x_star.push((0..n).map(|i| col[i] - theta[i] * x_bar[j][unit_of_row[i]]).collect::<Vec<f64>>());
    }
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(x_vars.iter().map(|s| s.to_string()));
    let mut cols: Vec<&[f64]> = vec![&c_star];
    cols.extend(x_star.iter().map(Vec::as_slice));
    let yv = DVector::from_column_slice(&y_star);
    let fit = least_squares(&yv, &design(&cols, n))?;
    if n <= k + 1 {
        return Err(Error::SingularDesign { rank: n, columns: k + 1 });
    }
    let mut res = finish_regression(names, &yv, fit, n - k - 1, true, k + 1)?;
    // R^2 against the untransformed dependent variable is more readable.
    let fitted_raw: Vec<f64> = (0..n)
        .map(|i| {
            let mut f = res.coefficients[0];
            for j in 0..k {
                f += res.coefficients[j + 1] * panel.column(x_vars[j]).map(|c| c[i]).unwrap_or(0.0);
            }
            f
        })
        .collect();
    let ym = y_all.iter().sum::<f64>() / n as f64;
    let tss: f64 = y_all.iter().map(|v| (v - ym).powi(2)).sum();
    let ssr: f64 = y_all.iter().zip(&fitted_raw).map(|(a, b)| (a - b).powi(2)).sum();
    res.r_squared = if tss > 0.0 { 1.0 - ssr / tss } else { 1.0 };
    res.adj_r_squared = 1.0 - (1.0 - res.r_squared) * ((n - 1) as f64 / (n - k - 1) as f64);
    if floored {
        res.notes.push("negative unit variance component floored at zero".into());
    }
    Ok((res, VarianceComponents { sigma2_e, sigma2_u, floored }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub coefficients: Vec<String>,
    /// The covariance difference was not positive definite; a pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

/// Hausman specification test comparing FE and RE on their common slopes.
pub fn hausman(fe: &RegressionResult, re: &RegressionResult) -> Result<HausmanResult> {
    let common: Vec<(usize, usize, String)> = fe
        .names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.as_str() != INTERCEPT)
        .filter_map(|(i, n)| re.index_of(n).map(|j| (i, j, n.clone())))
        .collect();
    let m = common.len();
    let d = DVector::from_iterator(m, common.iter().map(|(i, j, _)| fe.coefficients[*i] - re.coefficients[*j]));
    let v = DMatrix::from_fn(m, m, |a, b| {
        let (ia, ja, _) = &common[a];
        let (ib, jb, _) = &common[b];
        fe.covariance[(*ia, *ib)] - re.covariance[(*ja, *jb)]
    });
    let names = common.into_iter().map(|(_, _, n)| n).collect();
    if m == 0 || d.iter().all(|x| *x == 0.0) {
        return Ok(HausmanResult { statistic: 0.0, df: m, p_value: 1.0, coefficients: names, pseudo_inverse: false });
    }
    let sym = (&v + v.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max_ev = eig.eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let tol = 1e-10 * max_ev.max(f64::MIN_POSITIVE);
    let pseudo_inverse = eig.eigenvalues.iter().any(|&e| e <= tol);
    let mut stat = 0.0;
    let mut rank = 0;
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > tol {
            let proj = eig.eigenvectors.column(idx).dot(&d);
            stat += proj * proj / ev;
            rank += 1;
        }
    }
    let p_value = if rank == 0 { 1.0 } else { dist::chisq_sf(stat, rank as f64)? };
    Ok(HausmanResult { statistic: stat, df: rank, p_value, coefficients: names, pseudo_inverse })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VarianceMode {
    /// `(phi - mean_t)^2` with the mean taken within period across units.
    SqDevFromRoundMean,
    /// `|phi - mean_t|`.
    AbsDev,
    /// `(phi - truth)^2`.
    SqDevFromTruth(f64),
}

/// Per-row dispersion target for the bounded-learning analysis.
pub fn variance_target(panel: &LongPanel, phi_col: &str, mode: VarianceMode) -> Result<Vec<f64>> {
    let phi = panel.column(phi_col)?;
    // (first value, sum of offsets from it, count): exact when a round is constant.
    let mut sums: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
    for (p, v) in panel.period.iter().zip(phi) {
        let e = sums.entry(*p).or_insert((*v, 0.0, 0));
        e.1 += v - e.0;
        e.2 += 1;
    }
    Ok(panel
        .period
        .iter()
        .zip(phi)
        .map(|(p, v)| {
            let (first, s, c) = sums[p];
            let m = first + s / c as f64;
            match mode {
                VarianceMode::SqDevFromRoundMean => (v - m).powi(2),
                VarianceMode::AbsDev => (v - m).abs(),
                VarianceMode::SqDevFromTruth(truth) => (v - truth).powi(2),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::{mean, sample_sd};
    use crate::seeds;
    use rand_distr::{Distribution, Normal};

    fn balanced(units: usize, periods: u32) -> LongPanel {
        let mut u = Vec::new();
        let mut p = Vec::new();
        for i in 0..units {
            for t in 1..=periods {
                u.push(i as u64);
                p.push(t);
            }
        }
        LongPanel::new(u, p).unwrap()
    }

    #[test]
    fn constant_within_unit_gives_zero_slope() {
        let panel = balanced(10, 5);
        let y: Vec<f64> = panel.unit.iter().map(|&u| u as f64 * 1.3).collect();
        let round: Vec<f64> = panel.period.iter().map(|&t| t as f64).collect();
        let panel = panel.with("y", y).unwrap().with("round", round).unwrap();
        let r = within_fe(&panel, "y", &["round"]).unwrap();
        assert!(r.coef("round").unwrap().abs() < 1e-12);
    }

    #[test]
    fn fe_absorbs_unit_constant_columns() {
        let panel = balanced(30, 4);
        let mut rng = seeds::rng_from(5);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..panel.len()).map(|_| nd.sample(&mut rng)).collect();
        let z: Vec<f64> = panel.unit.iter().map(|&u| (u % 3) as f64).collect();
        let y: Vec<f64> = (0..panel.len()).map(|i| 2.0 * x[i] + z[i] + nd.sample(&mut rng)).collect();
        let panel = panel.with("y", y).unwrap().with("x", x).unwrap().with("z", z).unwrap();
        let a = within_fe(&panel, "y", &["x"]).unwrap();
        let b = within_fe(&panel, "y", &["x", "z"]).unwrap();
        assert_eq!(b.dropped, vec!["z".to_string()]);
        assert!((a.coef("x").unwrap() - b.coef("x").unwrap()).abs() < 1e-12);
        assert!((a.se("x").unwrap() - b.se("x").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fe_drops_singletons() {
        let mut panel = balanced(6, 3);
        panel.unit.push(99);
        panel.period.push(1);
        let round: Vec<f64> = panel.period.iter().map(|&t| t as f64).collect();
        let y: Vec<f64> = (0..panel.len()).map(|i| (i % 4) as f64).collect();
        let panel = panel.with("y", y).unwrap().with("round", round).unwrap();
        let r = within_fe(&panel, "y", &["round"]).unwrap();
        assert_eq!(r.dropped_units, 1);
        assert_eq!(r.n_obs, 18);
    }

    #[test]
    fn missing_columns_are_schema_errors() {
        let panel = balanced(3, 3);
        match within_fe(&panel, "y", &["round"]) {
            Err(Error::Schema { missing }) => assert_eq!(missing, vec!["y".to_string(), "round".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hausman_identical_estimates() {
        let panel = balanced(20, 4);
        let mut rng = seeds::rng_from(1);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..panel.len()).map(|_| nd.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + nd.sample(&mut rng)).collect();
        let panel = panel.with("y", y).unwrap().with("x", x).unwrap();
        let fe = within_fe(&panel, "y", &["x"]).unwrap();
        let h = hausman(&fe, &fe).unwrap();
        assert_eq!(h.statistic, 0.0);
        assert_eq!(h.p_value, 1.0);
    }

    fn hausman_rejection_rate(correlated: bool) -> f64 {
        let reps = 200;
        let rejections: usize = crate::par::map_indexed(crate::par::Backend::default(), reps, |rep| {
            let mut rng = seeds::derived_rng(314, seeds::stream::REPLICATION, rep as u64 + if correlated { 10_000 } else { 0 });
            let nd = Normal::new(0.0, 1.0).unwrap();
            let units = 100;
            let periods = 5;
            let panel = balanced(units, periods);
            let alpha: Vec<f64> = (0..units).map(|_| nd.sample(&mut rng)).collect();
            let x: Vec<f64> =
                panel.unit.iter().map(|&u| nd.sample(&mut rng) + if correlated { alpha[u as usize] } else { 0.0 }).collect();
            let y: Vec<f64> =
                (0..panel.len()).map(|i| 1.0 + 0.5 * x[i] + alpha[panel.unit[i] as usize] + nd.sample(&mut rng)).collect();
            let panel = panel.with("y", y).unwrap().with("x", x).unwrap();
            let fe = within_fe(&panel, "y", &["x"]).unwrap();
            let re = random_effects(&panel, "y", &["x"]).unwrap();
            usize::from(hausman(&fe, &re).unwrap().p_value < 0.05)
        })
        .into_iter()
        .sum();
        rejections as f64 / reps as f64
    }

    #[test]
    fn hausman_size_under_random_effects() {
        let rate = hausman_rejection_rate(false);
        assert!((rate - 0.05).abs() <= 0.03, "rejection rate {rate}");
    }

    #[test]
    fn hausman_power_under_correlated_effects() {
        let rate = hausman_rejection_rate(true);
        assert!(rate > 0.8, "rejection rate {rate}");
    }

    #[test]
    fn fe_no_learning_effect_is_insignificant() {
        let reps = 100;
        let insignificant = (0..reps)
            .filter(|&rep| {
                let mut rng = seeds::derived_rng(2718, 0, rep);
                let nd = Normal::new(0.0, 1.2).unwrap();
                let panel = balanced(149, 5);
                let ability: Vec<f64> = (0..149).map(|_| 4.0 + nd.sample(&mut rng)).collect();
                let score: Vec<f64> = panel.unit.iter().map(|&u| ability[u as usize] + nd.sample(&mut rng)).collect();
                let round: Vec<f64> = panel.period.iter().map(|&t| t as f64).collect();
                let panel = panel.with("score", score).unwrap().with("round", round).unwrap();
                within_fe(&panel, "score", &["round"]).unwrap().p("round").unwrap() >= 0.05
            })
            .count();
        assert!(insignificant >= 90, "{insignificant}/100 insignificant");
    }

    #[test]
    fn re_recovers_effort_slopes() {
        // Effort = 345 - 33 round + 42 over - 14 round*over + u_i + e.
        let reps = 200;
        let est: Vec<(f64, f64)> = (0..reps)
            .map(|rep| {
                let mut rng = seeds::derived_rng(1618, 0, rep);
                let ue = Normal::new(0.0, 80.0).unwrap();
                let ee = Normal::new(0.0, 60.0).unwrap();
                let units = 189;
                let panel = balanced(units, 5);
                let over_u: Vec<f64> = (0..units).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 }).collect();
                let alpha: Vec<f64> = (0..units).map(|_| ue.sample(&mut rng)).collect();
                let round: Vec<f64> = panel.period.iter().map(|&t| t as f64).collect();
                let over: Vec<f64> = panel.unit.iter().map(|&u| over_u[u as usize]).collect();
                let inter: Vec<f64> = round.iter().zip(&over).map(|(r, o)| r * o).collect();
                let y: Vec<f64> = (0..panel.len())
                    .map(|i| {
                        345.0 - 33.0 * round[i] + 42.0 * over[i] - 14.0 * inter[i]
                            + alpha[panel.unit[i] as usize]
                            + ee.sample(&mut rng)
                    })
                    .collect();
                let panel = panel
                    .with("effort", y)
                    .unwrap()
                    .with("round", round)
                    .unwrap()
                    .with("over", over)
                    .unwrap()
                    .with("round_x_over", inter)
                    .unwrap();
                let r = random_effects(&panel, "effort", &["round", "over", "round_x_over"]).unwrap();
                (r.coef("round").unwrap(), r.coef("round_x_over").unwrap())
            })
            .collect();
        let slopes: Vec<f64> = est.iter().map(|e| e.0).collect();
        let inter: Vec<f64> = est.iter().map(|e| e.1).collect();
        let se = |v: &[f64]| sample_sd(v) / (v.len() as f64).sqrt();
        assert!((mean(&slopes) + 33.0).abs() < 2.0 * se(&slopes), "{}", mean(&slopes));
        assert!((mean(&inter) + 14.0).abs() < 2.0 * se(&inter), "{}", mean(&inter));
    }

    #[test]
    fn re_floors_negative_component() {
        // No unit effect at all and tiny T: the between estimate often undershoots.
        let panel = balanced(40, 2);
        let mut rng = seeds::rng_from(8);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..panel.len()).map(|_| nd.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..panel.len()).map(|i| x[i] + nd.sample(&mut rng)).collect();
        let panel = panel.with("y", y).unwrap().with("x", x).unwrap();
        let c = random_effects_components(&panel, "y", &["x"]).unwrap();
        assert!(c.sigma2_u >= 0.0);
        if c.floored {
            assert_eq!(c.sigma2_u, 0.0);
        }
    }

    #[test]
    fn variance_target_modes() {
        let panel = LongPanel::new(vec![1, 2, 1, 2], vec![1, 1, 2, 2]).unwrap().with("phi", vec![0.2, 0.6, 0.3, 0.3]).unwrap();
        let sq = variance_target(&panel, "phi", VarianceMode::SqDevFromRoundMean).unwrap();
        assert!((sq[0] - 0.04).abs() < 1e-12 && (sq[1] - 0.04).abs() < 1e-12);
        assert_eq!(&sq[2..], &[0.0, 0.0]);
        let ab = variance_target(&panel, "phi", VarianceMode::AbsDev).unwrap();
        assert!((ab[0] - 0.2).abs() < 1e-12);
        let panel = LongPanel::new(vec![1], vec![1]).unwrap().with("phi", vec![0.4]).unwrap();
        let tr = variance_target(&panel, "phi", VarianceMode::SqDevFromTruth(0.5)).unwrap();
        assert!((tr[0] - 0.01).abs() < 1e-12);
    }
}
