use std::time::{Duration, Instant};

use mllab_cli::commands::{cmd_estimate, cmd_figures, cmd_panel, CommandResult};
use mllab_cli::Scenario;
use mllab_core::clustering::{rand_index, select_model, two_cluster_sample, Criterion, Point};
use mllab_core::dynamics::{init_prior, monte_carlo, simulate, Mode, PopulationSpec, PriorKind};
use mllab_core::econometrics::dist::{chisq_cdf, f_cdf, normal_cdf, student_t_cdf};
use mllab_core::econometrics::{diff_gmm, paired_t_one_sided, Alternative, Instrument, LongPanel};
use mllab_core::equilibrium::{gamma, solve_equilibrium};
use mllab_core::model::{AgentProfile, Technology};
use mllab_core::protocol::{expected_bdm_payoff, optimal_bid, BidBasis, ExperimentConfig, PanelDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const ORACLE: &str = include_str!("../../core/tests/data/dist_oracle.csv");
const SUITE_BUDGET: Duration = Duration::from_secs(300);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn sd(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

/// Effort maximising phi * ab * e^alpha - kappa * e^beta, from the first-order condition.
fn effort_by_hand(t: &Technology, ab: f64, phi: f64) -> f64 {
    let (alpha, beta, kappa) = (t.effort_exponent, t.cost_exponent, t.cost_scale);
    (phi * ab * alpha / (kappa * beta)).powf(1.0 / (beta - alpha)).min(t.max_effort)
}

fn overconfident_limits() -> Verdict {
    let tech = Technology::default();
    let mut r = rng(1);
    let (mut below, mut worst_gamma, mut worst_closed, mut n) = (0, 0f64, 0f64, 0u64);
    while n < 1000 {
        let a = r.random_range(0.5..8.0);
        let ab = a + r.random_range(0.01..4.0);
        let phi = r.random_range(0.05..1.0);
        if a < phi * ab {
            continue;
        }
        n += 1;
        let agent = AgentProfile::new(n, a, ab).unwrap();
        let eq = solve_equilibrium(&tech, &agent, phi).unwrap();
        below += u64::from(eq.phi_limit < phi);
        worst_gamma = worst_gamma.max(gamma(&tech, &agent, phi, eq.phi_limit).abs());
        worst_closed = worst_closed.max((eq.phi_limit - phi * a / ab).abs());
    }
    verdict(
        below == n && worst_gamma < 1e-8 && worst_closed < 1e-8,
        format!("{below}/{n} below truth, max |surprise| {worst_gamma:.1e}, max closed-form gap {worst_closed:.1e}"),
    )
}

fn underconfident_limits() -> Verdict {
    let tech = Technology::default();
    let mut r = rng(2);
    let (mut inside, mut n) = (0, 0u64);
    while n < 1000 {
        let ab = r.random_range(0.5..8.0);
        let a = ab + r.random_range(0.01..4.0);
        let phi = r.random_range(0.05..1.0);
        if ab < phi {
            continue;
        }
        n += 1;
        let eq = solve_equilibrium(&tech, &AgentProfile::new(n, a, ab).unwrap(), phi).unwrap();
        inside += u64::from((eq.phi_limit - phi).abs() <= a - ab);
    }
    verdict(inside == n, format!("{inside}/{n} within the ability gap"))
}

fn solver_matches_grid() -> Verdict {
    let mut r = rng(3);
    let grid = 100_000;
    let (mut worst, mut n) = (0f64, 0);
    while n < 100 {
        let tech = Technology {
            effort_exponent: r.random_range(0.2..0.8),
            cost_exponent: r.random_range(1.5..3.0),
            cost_scale: r.random_range(0.2..2.0),
            ..Technology::default()
        };
        let a = r.random_range(0.5..8.0);
        let ab = r.random_range(0.5..8.0);
        let phi_true = r.random_range(0.05..1.0);
        if phi_true * a > ab {
            continue;
        }
        n += 1;
        let eq = solve_equilibrium(&tech, &AgentProfile::new(n, a, ab).unwrap(), phi_true).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for j in 1..=grid {
            let phi = j as f64 / grid as f64;
            let y = effort_by_hand(&tech, ab, phi).powf(tech.effort_exponent);
            let g = (phi_true * a * y - phi * ab * y).abs();
            if g < best.0 {
                best = (g, phi);
            }
        }
        worst = worst.max((eq.phi_limit - best.1).abs());
    }
    verdict(worst < 1e-4, format!("max |root - grid argmin| {worst:.1e} over {n} instances"))
}

fn dynamics_converge() -> Verdict {
    let tech = Technology::default();
    let agent = AgentProfile::new(0, 4.0, 5.0).unwrap();
    let limit = solve_equilibrium(&tech, &agent, 0.5).unwrap().phi_limit;
    let closed_form = 0.5 * 4.0 / 5.0;
    let prior = init_prior(PriorKind::Uniform).unwrap();
    let terminal: Vec<f64> = (0..200)
        .map(|s| simulate(&agent, &tech, 0.5, &prior, 500, s, Mode::Stochastic).unwrap().last().unwrap().phi_point)
        .collect();
    let gap = (mean(&terminal) - limit).abs();
    let mut exact = true;
    for center in [0.1, 0.5, 0.9] {
        let prior = init_prior(PriorKind::TruncatedNormal { mean: center, sd: 0.2 }).unwrap();
        let path = simulate(&agent, &tech, 0.5, &prior, 4, 0, Mode::Deterministic).unwrap();
        exact &= path[1..].iter().all(|r| r.phi_point == closed_form && (r.phi_point - limit).abs() < 1e-12);
    }
    verdict(
        gap < 0.02 && exact,
        format!(
            "stochastic mean {:.4} vs limit {limit:.4} (gap {gap:.4}); deterministic exact after one update: {exact}",
            mean(&terminal)
        ),
    )
}

fn directional_predictions() -> Verdict {
    let tech = Technology::default();
    let (mut m1, mut m5, mut v1, mut v5) = (vec![], vec![], vec![], vec![]);
    for rep in 0..50u64 {
        let over = PopulationSpec::overconfident(100).draw(rep).unwrap();
        let panel = monte_carlo(&over, &tech, 0.5, 5, rep, Mode::Stochastic).unwrap();
        m1.push(mean(&panel.round_beliefs(1)));
        m5.push(mean(&panel.round_beliefs(5)));
        let under = PopulationSpec::underconfident(100).draw(1000 + rep).unwrap();
        let panel = monte_carlo(&under, &tech, 0.5, 5, 1000 + rep, Mode::Stochastic).unwrap();
        v1.push(variance(&panel.round_beliefs(1)));
        v5.push(variance(&panel.round_beliefs(5)));
    }
    let means = paired_t_one_sided(&m1, &m5, Alternative::Less).unwrap();
    let spread = paired_t_one_sided(&v1, &v5, Alternative::Less).unwrap();
    verdict(
        means.p_value < 0.05 && spread.p_value < 0.05,
        format!(
            "overconfident mean {:.3} -> {:.3} (p {:.1e}); underconfident variance {:.4} -> {:.4} (p {:.1e})",
            mean(&m1),
            mean(&m5),
            means.p_value,
            mean(&v1),
            mean(&v5),
            spread.p_value
        ),
    )
}

fn bdm_truthful() -> Verdict {
    let tech = Technology::default();
    let mut r = rng(6);
    let (mut worst, mut payoff_gap) = (0f64, 0f64);
    for i in 0..100 {
        let basis = if i % 2 == 0 { BidBasis::FinalTest } else { BidBasis::CurrentRound };
        let cfg = ExperimentConfig { bid_basis: basis, ..ExperimentConfig::default() };
        let ab = r.random_range(0.5..10.0);
        let belief =
            init_prior(PriorKind::TruncatedNormal { mean: r.random_range(0.05..0.95), sd: r.random_range(0.05..0.4) }).unwrap();
        let phi = match basis {
            BidBasis::FinalTest => 1.0,
            BidBasis::CurrentRound => belief.support().iter().zip(belief.mass()).map(|(s, m)| s * m).sum(),
        };
        let expected = (ab * effort_by_hand(&tech, ab, phi).powf(tech.effort_exponent)).min(cfg.questions_per_round as f64);
        let value = cfg.piece_rate_final * expected;
        let cap = cfg.bdm_price_cap;
        // Price uniform on [0, cap]: a bid wins every price at or below it and pays that price.
        let payoff = |bid: f64| {
            let steps = 4000;
            let h = bid / steps as f64;
            (0..steps).map(|k| value - (k as f64 + 0.5) * h).sum::<f64>() * h / cap
        };
        let argmax = (0..=160)
            .map(|k| k as f64 * cap / 160.0)
            .map(|b| (b, payoff(b)))
            .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
            .0;
        let bid = optimal_bid(&belief, ab, &tech, &cfg).unwrap();
        worst = worst.max((bid - argmax).abs());
        payoff_gap = payoff_gap.max((expected_bdm_payoff(argmax, value, &cfg) - payoff(argmax)).abs());
    }
    verdict(
        worst <= 0.01 && payoff_gap < 1e-9,
        format!("max |truthful bid - brute-force argmax| {worst:.4} over 100 beliefs; payoff formula gap {payoff_gap:.1e}"),
    )
}

struct GmmDraw {
    drift: f64,
    persistence: f64,
    sargan_reject: bool,
    serial_pattern: bool,
}

fn gmm_panel(seed: u64, units: usize, periods: u32, drift: f64, persistence: f64) -> LongPanel {
    let mut r = rng(seed);
    let shock = Normal::new(0.0, 0.1).unwrap();
    let effect = Normal::new(0.3, 0.05).unwrap();
    let burn = 30i32;
    let (mut unit, mut period, mut y, mut effort) = (vec![], vec![], vec![], vec![]);
    for i in 0..units {
        let mu = effect.sample(&mut r);
        let mut level = mu / (1.0 - persistence);
        let mut surprise = 0.0;
        for t in -burn..=periods as i32 {
            // Effort reacts to last round's level and shock only, so it is predetermined.
            let e = 1.0 + 0.5 * level + 3.0 * surprise + shock.sample(&mut r);
            surprise = shock.sample(&mut r);
            level = mu + drift * t as f64 + persistence * level + surprise;
            if t >= 1 {
                unit.push(i as u64);
                period.push(t as u32);
                y.push(level);
                effort.push(e);
            }
        }
    }
    LongPanel::new(unit, period).unwrap().with("y", y).unwrap().with("effort", effort).unwrap()
}

fn gmm_recovery() -> Verdict {
    let (drift, persistence) = (-0.02, 0.34);
    let draws: Vec<GmmDraw> = (0..200)
        .map(|s| {
            let panel = gmm_panel(7000 + s, 200, 5, drift, persistence);
            let g = diff_gmm(&panel, "y", "effort", &[Instrument::LagEffort, Instrument::Lag2Dep]).unwrap();
            GmmDraw {
                drift: g.drift,
                persistence: g.persistence,
                sargan_reject: g.sargan_p.unwrap() < 0.05,
                serial_pattern: g.ar1_p < 0.05 && g.ar2_p.is_some_and(|p| p >= 0.05),
            }
        })
        .collect();
    let n = draws.len() as f64;
    let d: Vec<f64> = draws.iter().map(|g| g.drift).collect();
    let p: Vec<f64> = draws.iter().map(|g| g.persistence).collect();
    let (d_se, p_se) = (sd(&d) / n.sqrt(), sd(&p) / n.sqrt());
    let d_ok = (mean(&d) - drift).abs() <= 2.0 * d_se;
    let p_ok = (mean(&p) - persistence).abs() <= 2.0 * p_se;
    let rejections = draws.iter().filter(|g| g.sargan_reject).count() as f64 / n;
    let pattern = draws.iter().filter(|g| g.serial_pattern).count() as f64 / n;
    verdict(
        d_ok && p_ok && (0.02..=0.08).contains(&rejections) && pattern >= 0.9,
        format!(
            "drift {:.4} (MC se {d_se:.4}), persistence {:.4} (MC se {p_se:.4}), J rejects {:.1}%, m1/m2 pattern {:.1}%",
            mean(&d),
            mean(&p),
            100.0 * rejections,
            100.0 * pattern
        ),
    )
}

fn distribution_kernels() -> Verdict {
    let mut worst = 0f64;
    let mut probes = 0;
    for line in ORACLE.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        let num = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
        let (x, p1, p2, want) = (num(c[1]), num(c[2]), num(c[3]), num(c[4]));
        let got = match c[0] {
            "normal" => normal_cdf(x),
            "t" => student_t_cdf(x, p1).unwrap(),
            "chisq" => chisq_cdf(x, p1).unwrap(),
            "f" => f_cdf(x, p1, p2).unwrap(),
            other => panic!("unknown distribution {other}"),
        };
        worst = worst.max((got - want).abs());
        probes += 1;
    }
    let t = paired_t_one_sided(&[0.0; 3], &[1.0, 2.0, 3.0], Alternative::Greater).unwrap();
    let hand = 0.5 - 12f64.sqrt() / (2.0 * 14f64.sqrt());
    let t_gap = (t.p_value - hand).abs();
    verdict(
        probes == 50 && worst < 1e-10 && t_gap < 1e-6 && (t.p_value - 0.0371).abs() < 1e-4,
        format!("{probes} probes, max error {worst:.1e}; paired-t p {:.6} (hand {hand:.6})", t.p_value),
    )
}

fn clustering() -> Verdict {
    let (mut two, mut exact_rand, mut monotone) = (0, 0, true);
    for seed in 0..100 {
        let pts = two_cluster_sample(200, 0.03, seed);
        let scaled: Vec<Point> = pts.iter().map(|p| [p[0], p[1] * 10.0]).collect();
        let a = select_model(&pts, 1..=6, Criterion::Bic, seed).unwrap();
        let b = select_model(&scaled, 1..=6, Criterion::Bic, seed).unwrap();
        two += usize::from(a.best.k == 2);
        exact_rand += usize::from(rand_index(&a.best.assign(&pts), &b.best.assign(&scaled)) == 1.0);
        monotone &= a.all_monotone && b.all_monotone;
    }
    // The full range is costly on one core, so it is spot-checked.
    let mut full = 0;
    for seed in 0..5 {
        let s = select_model(&two_cluster_sample(200, 0.03, seed), 1..=15, Criterion::Bic, seed).unwrap();
        full += usize::from(s.best.k == 2);
        monotone &= s.all_monotone;
    }
    verdict(
        two >= 95 && exact_rand == 100 && monotone && full == 5,
        format!("k = 2 in {two}/100 (k <= 6) and {full}/5 (k <= 15), Rand index 1.0 in {exact_rand}/100, every EM run monotone: {monotone}"),
    )
}

fn output<'a>(res: &'a CommandResult, name: &str) -> &'a str {
    let o = res.outputs.iter().find(|o| o.name == name).unwrap_or_else(|| panic!("{name} missing"));
    std::str::from_utf8(&o.bytes).unwrap()
}

fn row<'a>(csv: &'a str, label: &str) -> Vec<&'a str> {
    csv.lines()
        .find(|l| l.starts_with(&format!("{label},")))
        .unwrap_or_else(|| panic!("no row {label}"))
        .split(',')
        .skip(1)
        .collect()
}

fn number(cell: &str) -> f64 {
    cell.trim_end_matches('*').parse().unwrap_or_else(|_| panic!("not a number: {cell}"))
}

fn end_to_end(started: Instant) -> Verdict {
    let scenario = Scenario::default();
    let panel = cmd_panel(&scenario, scenario.seed).unwrap();
    let data = PanelDataset::from_csv_str(output(&panel, "panel.csv")).unwrap();
    let est = cmd_estimate(&data, None, &scenario).unwrap();

    let t1 = row(output(&est, "table1.csv"), "Overconfidence");
    let (n, oc_mean, oc_sd) = (number(t1[0]), number(t1[1]), number(t1[2]));
    let calibrated = (oc_mean - 2.45).abs() <= 3.0 * oc_sd / n.sqrt();

    let t4 = output(&est, "table4.csv");
    let f: Vec<f64> = row(t4, "First-stage F").into_iter().map(number).collect();
    let col = (0..f.len()).fold(0, |b, j| if f[j] > f[b] { j } else { b });
    let drift = number(row(t4, "d Round")[col]);

    let interaction = number(row(output(&est, "table3.csv"), "Round x Overconfident")[2]);

    let figs = cmd_figures(&data, &scenario).unwrap();
    let round5 = |group: &str| {
        output(&figs, "belief_summary.csv")
            .lines()
            .find(|l| l.starts_with(&format!("{group},5,")))
            .map(|l| number(l.split(',').nth(3).unwrap()))
            .unwrap()
    };
    let (over, under) = (round5("overconfident"), round5("underconfident"));

    let elapsed = started.elapsed();
    verdict(
        calibrated && drift < 0.0 && interaction < 0.0 && over < under && elapsed < SUITE_BUDGET,
        format!(
            "overconfidence mean {oc_mean:.3} (sd {oc_sd:.3}); drift {drift:.4} in column ({}); Round x Overconfident {interaction:.3}; round-5 beliefs {over:.3} < {under:.3}; suite {:.1} s",
            col + 1,
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut failed = 0;
    let mut check = |id: u32, name: &str, budget: Option<Duration>, f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let took = t.elapsed();
        let in_time = budget.is_none_or(|b| took < b);
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        let limit = budget.map_or(String::new(), |b| format!(", limit {} s", b.as_secs()));
        println!("{} {id:>2} {name}: {} [{:.2} s{limit}]", if pass { "PASS" } else { "FAIL" }, v.detail, took.as_secs_f64());
    };
    let secs = |s| Some(Duration::from_secs(s));
    check(1, "overconfident limit", secs(5), &overconfident_limits);
    check(2, "underconfident limit", secs(5), &underconfident_limits);
    check(3, "solver against grid oracle", None, &solver_matches_grid);
    check(4, "dynamics convergence", None, &dynamics_converge);
    check(5, "directional predictions", None, &directional_predictions);
    check(6, "BDM truthfulness", secs(10), &bdm_truthful);
    check(7, "estimator recovery", secs(120), &gmm_recovery);
    check(8, "distribution kernels", None, &distribution_kernels);
    check(9, "clustering", None, &clustering);
    check(10, "end-to-end replication shape", None, &|| end_to_end(started));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
