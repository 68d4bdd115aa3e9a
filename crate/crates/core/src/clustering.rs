//! Two-dimensional Gaussian mixtures fitted by EM, with BIC/AIC model selection.

use std::ops::RangeInclusive;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::par::{self, Backend};
use crate::seeds::{self, SimRng};
use crate::{Error, Result};

pub type Point = [f64; 2];
pub type Cov = [[f64; 2]; 2];

pub const RIDGE: f64 = 1e-6;
/// Convergence threshold on the per-point log-likelihood gain.
pub const TOLERANCE: f64 = 1e-7;
pub const MAX_ITER: usize = 500;
pub const DEFAULT_INITS: usize = 10;
const COLLAPSE_WEIGHT: f64 = 1e-8;
/// Relative slack for rounding when checking EM ascent.
pub const MONOTONE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Point>,
    pub covariances: Vec<Cov>,
    pub log_likelihood: f64,
    pub bic: f64,
    pub aic: f64,
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Some component collapsed during fitting and was re-seeded.
    pub reinitialized: bool,
    /// Log-likelihood after every EM iteration of the winning run.
    #[serde(skip)]
    pub trace: Vec<f64>,
    /// Indices into `trace` where a re-seed restarted the ascent.
    #[serde(skip)]
    pub restarts: Vec<usize>,
}

pub fn free_parameters(k: usize) -> usize {
    6 * k - 1
}

fn det(c: &Cov) -> f64 {
    c[0][0] * c[1][1] - c[0][1] * c[1][0]
}

/// Per-component constants for fast log-density evaluation.
#[derive(Clone, Copy)]
struct Prepared {
    offset: f64,
    mean: Point,
    i00: f64,
    i01: f64,
    i11: f64,
}

impl Prepared {
    fn new(weight: f64, mean: Point, c: &Cov) -> Self {
        let d = det(c);
        Self {
            offset: weight.ln() - 0.5 * d.ln() - (2.0 * std::f64::consts::PI).ln(),
            mean,
            i00: c[1][1] / d,
            i01: -c[0][1] / d,
            i11: c[0][0] / d,
        }
    }

    #[inline]
    fn log_joint(&self, p: &Point) -> f64 {
        let dx = p[0] - self.mean[0];
        let dy = p[1] - self.mean[1];
        self.offset - 0.5 * (self.i00 * dx * dx + 2.0 * self.i01 * dx * dy + self.i11 * dy * dy)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl MixtureModel {
    /// Pieces of `trace` between re-seeds; EM guarantees ascent within each.
    pub fn trace_segments(&self) -> Vec<&[f64]> {
        let mut cuts = vec![0];
        cuts.extend(&self.restarts);
        cuts.push(self.trace.len());
        cuts.windows(2).map(|w| &self.trace[w[0]..w[1]]).collect()
    }

    /// No drop in log-likelihood beyond `rel_tol` (relative) inside any segment.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.trace_segments().iter().all(|seg| seg.windows(2).all(|w| w[1] >= w[0] - rel_tol * w[0].abs().max(1.0)))
    }

    fn prepared(&self) -> Vec<Prepared> {
        (0..self.k).map(|j| Prepared::new(self.weights[j], self.means[j], &self.covariances[j])).collect()
    }

    fn for_each_joint(&self, points: &[Point], mut f: impl FnMut(usize, &[f64])) {
        let prep = self.prepared();
        let mut buf = vec![0.0; self.k];
        for (i, p) in points.iter().enumerate() {
            for (b, c) in buf.iter_mut().zip(&prep) {
                *b = c.log_joint(p);
            }
            f(i, &buf);
        }
    }

    pub fn log_likelihood_of(&self, points: &[Point]) -> f64 {
        let mut total = 0.0;
        self.for_each_joint(points, |_, buf| total += log_sum_exp(buf));
        total
    }

    /// Posterior component probabilities, one row per point.
    pub fn responsibilities(&self, points: &[Point]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(points.len());
        self.for_each_joint(points, |_, buf| {
            let lse = log_sum_exp(buf);
            out.push(buf.iter().map(|l| (l - lse).exp()).collect());
        });
        out
    }

    /// Argmax responsibility; ties go to the lowest component index.
    pub fn assign(&self, points: &[Point]) -> Vec<usize> {
        let mut out = Vec::with_capacity(points.len());
        self.for_each_joint(points, |_, buf| {
            let mut best = 0;
            for j in 1..buf.len() {
                if buf[j] > buf[best] {
                    best = j;
                }
            }
            out.push(best);
        });
        out
    }

    /// E-step: fill the flat `n x k` responsibility matrix and return the log-likelihood.
    fn e_step(&self, points: &[Point], resp: &mut [f64]) -> f64 {
        let k = self.k;
        let mut total = 0.0;
        self.for_each_joint(points, |i, buf| {
            let lse = log_sum_exp(buf);
            total += lse;
            for (r, l) in resp[i * k..(i + 1) * k].iter_mut().zip(buf) {
                *r = (l - lse).exp();
            }
        });
        total
    }
}

fn sample_moments(points: &[Point]) -> (Point, Cov) {
    let n = points.len() as f64;
    let m = [points.iter().map(|p| p[0]).sum::<f64>() / n, points.iter().map(|p| p[1]).sum::<f64>() / n];
    let mut c = [[0.0; 2]; 2];
    for p in points {
        let d = [p[0] - m[0], p[1] - m[1]];
        for a in 0..2 {
            for b in 0..2 {
                c[a][b] += d[a] * d[b] / n;
            }
        }
    }
    (m, c)
}

fn with_ridge(mut c: Cov) -> Cov {
    c[0][0] += RIDGE;
    c[1][1] += RIDGE;
    c
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn kmeans_pp(points: &[Point], k: usize, rng: &mut SimRng) -> Vec<Point> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[idx];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// One M-step from flat responsibilities. Returns whether any component had to be re-seeded.
fn m_step(points: &[Point], resp: &[f64], model: &mut MixtureModel, global: &Cov) -> bool {
    let k = model.k;
    let n = points.len() as f64;
    let mut nk = vec![0.0; k];
    let mut sx = vec![[0.0; 2]; k];
    for (i, p) in points.iter().enumerate() {
        for j in 0..k {
            let r = resp[i * k + j];
            nk[j] += r;
            sx[j][0] += r * p[0];
            sx[j][1] += r * p[1];
        }
    }
    let means: Vec<Point> = (0..k).map(|j| [sx[j][0] / nk[j], sx[j][1] / nk[j]]).collect();
    let mut sc = vec![[0.0; 3]; k];
    for (i, p) in points.iter().enumerate() {
        for j in 0..k {
            let r = resp[i * k + j];
            let dx = p[0] - means[j][0];
            let dy = p[1] - means[j][1];
            sc[j][0] += r * dx * dx;
            sc[j][1] += r * dx * dy;
            sc[j][2] += r * dy * dy;
        }
    }
    let mut reseeded = false;
    for j in 0..k {
        if nk[j] / n < COLLAPSE_WEIGHT {
            reseeded = true;
            // Re-seed at the point the current model explains worst.
            let mut worst = (0, f64::INFINITY);
            model.for_each_joint(points, |i, buf| {
                let l = log_sum_exp(buf);
                if l < worst.1 {
                    worst = (i, l);
                }
            });
            model.weights[j] = 1.0 / n;
            model.means[j] = points[worst.0];
            model.covariances[j] = with_ridge(*global);
            continue;
        }
        model.weights[j] = nk[j] / n;
        model.means[j] = means[j];
        let c01 = sc[j][1] / nk[j];
        model.covariances[j] = with_ridge([[sc[j][0] / nk[j], c01], [c01, sc[j][2] / nk[j]]]);
    }
    if reseeded {
        let total: f64 = model.weights.iter().sum();
        for w in model.weights.iter_mut() {
            *w /= total;
        }
    }
    reseeded
}

fn single_run(points: &[Point], k: usize, rng: &mut SimRng, global: &Cov) -> MixtureModel {
    let n = points.len();
    let centers = kmeans_pp(points, k, rng);
    // Hard nearest-centre responsibilities seed the first M-step.
    let mut resp = vec![0.0; n * k];
    for (i, p) in points.iter().enumerate() {
        let mut best = 0;
        for j in 1..k {
            if dist2(p, &centers[j]) < dist2(p, &centers[best]) {
                best = j;
            }
        }
        resp[i * k + best] = 1.0;
    }
    let mut model = MixtureModel {
        k,
        weights: vec![1.0 / k as f64; k],
        means: centers,
        covariances: vec![with_ridge(*global); k],
        log_likelihood: f64::NEG_INFINITY,
        bic: f64::NAN,
        aic: f64::NAN,
        n,
        iterations: 0,
        converged: false,
        reinitialized: false,
        trace: Vec::new(),
        restarts: Vec::new(),
    };
    model.reinitialized |= m_step(points, &resp, &mut model, global);
    let mut ll = model.e_step(points, &mut resp);
    model.trace.push(ll);
    for it in 1..=MAX_ITER {
        let previous = (model.weights.clone(), model.means.clone(), model.covariances.clone());
        let reseeded = m_step(points, &resp, &mut model, global);
        if reseeded {
            model.reinitialized = true;
            model.restarts.push(model.trace.len());
        }
        let next = model.e_step(points, &mut resp);
        model.iterations = it;
        // The ridge can cost a sliver of likelihood near a degenerate component.
        if !reseeded && next < ll {
            (model.weights, model.means, model.covariances) = previous;
            model.converged = true;
            break;
        }
        model.trace.push(next);
        let gain = (next - ll) / n as f64;
        ll = next;
        if gain.abs() < TOLERANCE {
            model.converged = true;
            break;
        }
    }
    model.log_likelihood = ll;
    let p = free_parameters(k) as f64;
    model.bic = p * (n as f64).ln() - 2.0 * ll;
    model.aic = 2.0 * p - 2.0 * ll;
    model
}

fn check_points(points: &[Point], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!("{} points cannot support {k} components", points.len())));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::invalid("mixture points must be finite"));
    }
    Ok(())
}

fn seeded_run(points: &[Point], k: usize, seed: u64, init: usize, global: &Cov) -> MixtureModel {
    let mut rng = seeds::derived_rng(seed, seeds::stream::MIXTURE, (k as u64) << 16 | init as u64);
    single_run(points, k, &mut rng, global)
}

/// Every one of `n_init` EM runs, each started from k-means++ centres.
pub fn em_runs(points: &[Point], k: usize, seed: u64, n_init: usize) -> Result<Vec<MixtureModel>> {
    check_points(points, k)?;
    let (_, global) = sample_moments(points);
    Ok((0..n_init.max(1)).map(|init| seeded_run(points, k, seed, init, &global)).collect())
}

/// Highest likelihood wins; the earliest run wins ties.
fn best_run(runs: impl IntoIterator<Item = MixtureModel>) -> MixtureModel {
    runs.into_iter().reduce(|a, b| if b.log_likelihood > a.log_likelihood { b } else { a }).expect("at least one run")
}

/// Best of `n_init` EM runs.
pub fn em_fit(points: &[Point], k: usize, seed: u64, n_init: usize) -> Result<MixtureModel> {
    Ok(best_run(em_runs(points, k, seed, n_init)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Bic,
    Aic,
}

impl Criterion {
    pub fn score(self, m: &MixtureModel) -> f64 {
        match self {
            Criterion::Bic => m.bic,
            Criterion::Aic => m.aic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub k: usize,
    pub log_likelihood: f64,
    pub bic: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub criterion: Criterion,
    pub best: MixtureModel,
    pub scores: Vec<ScoreRow>,
    /// Every EM run behind the selection, winners or not, ascended between re-seeds.
    pub all_monotone: bool,
}

pub fn select_model(points: &[Point], k_range: RangeInclusive<usize>, criterion: Criterion, seed: u64) -> Result<Selection> {
    select_model_with(Backend::default(), points, k_range, criterion, seed)
}

pub fn select_model_with(
    backend: Backend,
    points: &[Point],
    k_range: RangeInclusive<usize>,
    criterion: Criterion,
    seed: u64,
) -> Result<Selection> {
    let ks: Vec<usize> = k_range.collect();
    if ks.is_empty() {
        return Err(Error::invalid("empty range of component counts"));
    }
    for &k in &ks {
        check_points(points, k)?;
    }
    let (_, global) = sample_moments(points);
    // Every (k, init) pair is an independent job.
    let runs = par::map_indexed(backend, ks.len() * DEFAULT_INITS, |i| {
        seeded_run(points, ks[i / DEFAULT_INITS], seed, i % DEFAULT_INITS, &global)
    });
    let all_monotone = runs.iter().all(|m| m.is_monotone(MONOTONE_TOLERANCE));
    let mut runs = runs.into_iter();
    let fits: Vec<MixtureModel> = ks.iter().map(|_| best_run(runs.by_ref().take(DEFAULT_INITS))).collect();
    let scores = fits.iter().map(|m| ScoreRow { k: m.k, log_likelihood: m.log_likelihood, bic: m.bic, aic: m.aic }).collect();
    let best = fits.into_iter().reduce(|a, b| if criterion.score(&b) < criterion.score(&a) { b } else { a }).expect("non-empty");
    Ok(Selection { criterion, best, scores, all_monotone })
}

/// Fraction of point pairs on which two labelings agree (same/different cluster).
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleReport {
    pub dimension: usize,
    pub factor: f64,
    pub k_original: usize,
    pub k_scaled: usize,
    pub rand_index: f64,
}

/// Refit after multiplying one coordinate by `factor` and compare hard assignments.
pub fn scale_robustness(
    points: &[Point],
    dimension: usize,
    factor: f64,
    k_range: RangeInclusive<usize>,
    criterion: Criterion,
    seed: u64,
) -> Result<ScaleReport> {
    if dimension > 1 {
        return Err(Error::invalid(format!("dimension must be 0 or 1, got {dimension}")));
    }
    if !(factor.is_finite() && factor != 0.0) {
        return Err(Error::invalid(format!("scale factor must be finite and nonzero, got {factor}")));
    }
    let scaled: Vec<Point> = points
        .iter()
        .map(|p| {
            let mut q = *p;
            q[dimension] *= factor;
            q
        })
        .collect();
    let a = select_model(points, k_range.clone(), criterion, seed)?;
    let b = select_model(&scaled, k_range, criterion, seed)?;
    Ok(ScaleReport {
        dimension,
        factor,
        k_original: a.best.k,
        k_scaled: b.best.k,
        rand_index: rand_index(&a.best.assign(points), &b.best.assign(&scaled)),
    })
}

/// Two tight clusters at `(2, 0.2)` and `(2, 0.8)`, half the points each.
pub fn two_cluster_sample(n: usize, sd: f64, seed: u64) -> Vec<Point> {
    use rand_distr::{Distribution, Normal};
    let mut rng = seeds::rng_from(seed);
    let nd = Normal::new(0.0, sd).expect("positive sd");
    (0..n)
        .map(|i| {
            let centre = if i < n / 2 { [2.0, 0.2] } else { [2.0, 0.8] };
            [centre[0] + nd.sample(&mut rng), centre[1] + nd.sample(&mut rng)]
        })
        .collect()
}
