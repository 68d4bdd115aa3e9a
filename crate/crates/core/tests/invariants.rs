use std::collections::BTreeSet;

use mllab_core::clustering::{em_runs, rand_index, Point, MONOTONE_TOLERANCE};
use mllab_core::dynamics::{init_prior, simulate, Mode, PriorKind};
use mllab_core::equilibrium::{gamma, solve_equilibrium, verify_equilibrium};
use mllab_core::model::{optimal_effort, AgentProfile, Technology};
use mllab_core::protocol::{expected_bdm_payoff, generate_panel, optimal_bid, recover_phi, ExperimentConfig, SubjectPopulation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tech() -> Technology {
    Technology::default()
}

fn cloud(seed: u64, n: usize, blobs: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Point> = (0..blobs).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
    (0..n)
        .map(|i| {
            let c = centres[i % blobs];
            [c[0] + rng.random_range(-0.5..0.5), c[1] + rng.random_range(-0.5..0.5)]
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn overconfident_limit_is_below_truth(a in 0.5f64..8.0, gap in 0.01f64..4.0, phi in 0.05f64..1.0) {
        let ab = a + gap;
        prop_assume!(a >= phi * ab);
        let agent = AgentProfile::new(0, a, ab).unwrap();
        let eq = solve_equilibrium(&tech(), &agent, phi).unwrap();
        prop_assert!(!eq.boundary);
        prop_assert!(eq.phi_limit < phi);
        prop_assert!((eq.phi_limit - phi * a / ab).abs() < 1e-8);
        prop_assert!(gamma(&tech(), &agent, phi, eq.phi_limit).abs() < 1e-8);
        prop_assert!(verify_equilibrium(&eq, &tech(), &agent, phi).passed());
    }

    #[test]
    fn underconfident_limit_stays_within_the_gap(ab in 0.5f64..8.0, gap in 0.01f64..4.0, phi in 0.05f64..1.0) {
        prop_assume!(ab >= phi);
        let a = ab + gap;
        let agent = AgentProfile::new(0, a, ab).unwrap();
        let eq = solve_equilibrium(&tech(), &agent, phi).unwrap();
        prop_assert!((eq.phi_limit - phi).abs() <= a - ab + 1e-12);
        prop_assert!(eq.phi_limit >= phi);
        prop_assert!(verify_equilibrium(&eq, &tech(), &agent, phi).passed());
    }

    #[test]
    fn trajectories_act_on_the_posterior_mean(
        a in 1.0f64..6.0, ab in 1.0f64..6.0, phi in 0.1f64..1.0, center in 0.1f64..0.9, seed in any::<u64>(),
    ) {
        let agent = AgentProfile::new(0, a, ab).unwrap();
        let prior = init_prior(PriorKind::TruncatedNormal { mean: center, sd: 0.2 }).unwrap();
        let path = simulate(&agent, &tech(), phi, &prior, 6, seed, Mode::Stochastic).unwrap();
        for (i, r) in path.iter().enumerate() {
            prop_assert_eq!(r.round, i as u32 + 1);
            prop_assert!(r.phi_point > 0.0 && r.phi_point <= 1.0);
            prop_assert!(r.posterior_variance >= 0.0);
            prop_assert_eq!(r.effort, optimal_effort(&tech(), ab, r.phi_point).unwrap());
        }
    }

    #[test]
    fn deterministic_overconfident_beliefs_and_effort_never_rise(
        a in 1.0f64..6.0, gap in 0.05f64..3.0, phi in 0.1f64..1.0, center in 0.05f64..0.95,
    ) {
        let agent = AgentProfile::new(0, a, a + gap).unwrap();
        let prior = init_prior(PriorKind::TruncatedNormal { mean: center, sd: 0.1 }).unwrap();
        let path = simulate(&agent, &tech(), phi, &prior, 5, 0, Mode::Deterministic).unwrap();
        for w in path.windows(2).skip(1) {
            prop_assert!(w[1].phi_point <= w[0].phi_point);
            prop_assert!(w[1].effort <= w[0].effort);
        }
    }

    #[test]
    fn truthful_bid_maximises_expected_bdm_payoff(ab in 0.5f64..10.0, center in 0.05f64..0.95) {
        let cfg = ExperimentConfig::default();
        let belief = init_prior(PriorKind::TruncatedNormal { mean: center, sd: 0.1 }).unwrap();
        let value = optimal_bid(&belief, ab, &tech(), &cfg).unwrap();
        let best = expected_bdm_payoff(value, value, &cfg);
        for i in 0..=160 {
            prop_assert!(expected_bdm_payoff(i as f64 * 0.01, value, &cfg) <= best + 1e-15);
        }
    }

    #[test]
    fn recovery_round_trips_at_the_conditional_mean(a in 0.5f64..6.0, marker in 0.05f64..1.0) {
        let cfg = ExperimentConfig { marker_phi: marker, ..ExperimentConfig::default() };
        let belief = init_prior(PriorKind::Uniform).unwrap();
        let bid = optimal_bid(&belief, a, &tech(), &cfg).unwrap();
        let e = optimal_effort(&tech(), a, 1.0).unwrap();
        let score = tech().production(a, e);
        prop_assume!(score <= cfg.questions_per_round as f64);
        let phi = recover_phi(score * marker, bid, &cfg).unwrap().retained().unwrap();
        prop_assert!((phi - marker).abs() < 1e-12);
    }

    #[test]
    fn em_ascends_and_responsibilities_normalise(seed in 0u64..1000, blobs in 1usize..4, k in 1usize..5) {
        let pts = cloud(seed, 60, blobs);
        for m in em_runs(&pts, k, seed, 3).unwrap() {
            prop_assert!(m.is_monotone(MONOTONE_TOLERANCE), "trace {:?}", m.trace);
            for row in m.responsibilities(&pts) {
                let s: f64 = row.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|r| *r >= 0.0));
            }
        }
    }

    #[test]
    fn rand_index_ignores_label_names(labels in prop::collection::vec(0usize..4, 2..40), perm in Just([2usize, 0, 3, 1])) {
        let renamed: Vec<usize> = labels.iter().map(|l| perm[*l]).collect();
        prop_assert_eq!(rand_index(&labels, &renamed), 1.0);
        let other: Vec<usize> = labels.iter().map(|l| l / 2).collect();
        let ri = rand_index(&labels, &other);
        prop_assert!((0.0..=1.0).contains(&ri));
        prop_assert_eq!(ri, rand_index(&other, &labels));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn panels_respect_the_schema_invariants(seed in any::<u64>(), subjects in 1usize..40) {
        let cfg = ExperimentConfig::default();
        let pop = SubjectPopulation { subjects, ..SubjectPopulation::default() };
        let data = generate_panel(&pop, &cfg, &tech(), seed).unwrap();
        let mut keys = BTreeSet::new();
        for r in &data.records {
            prop_assert!(keys.insert((r.subject_id, r.round)));
            prop_assert!(r.score <= cfg.questions_per_round);
            prop_assert_eq!(r.mark, r.score as f64 * cfg.marker_phi);
            prop_assert!(r.bid >= 0.0 && r.bid <= cfg.bdm_price_cap);
            prop_assert!(r.effort_seconds >= 5.0);
            prop_assert_eq!(r.stated_score_r1.is_some(), r.round == 1);
            match r.phi_hat {
                Some(p) if (0.0..=1.0).contains(&p) => prop_assert!(!r.excluded),
                _ => prop_assert!(r.excluded),
            }
        }
        for s in &data.subjects {
            let rounds: Vec<u32> = data.records.iter().filter(|r| r.subject_id == s.subject_id).map(|r| r.round).collect();
            prop_assert_eq!(rounds, (1..=cfg.rounds).collect::<Vec<_>>());
        }
    }

    #[test]
    fn adding_subjects_keeps_existing_rows(seed in any::<u64>(), n in 1usize..20, extra in 1usize..10) {
        let cfg = ExperimentConfig::default();
        let small = generate_panel(&SubjectPopulation { subjects: n, ..SubjectPopulation::default() }, &cfg, &tech(), seed).unwrap();
        let large = generate_panel(&SubjectPopulation { subjects: n + extra, ..SubjectPopulation::default() }, &cfg, &tech(), seed).unwrap();
        prop_assert_eq!(&large.records[..small.records.len()], &small.records[..]);
    }
}
