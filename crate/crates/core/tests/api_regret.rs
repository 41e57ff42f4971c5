use proptest::prelude::*;

use avgrl_core::api::{
    certify, run_api, theorem_bound, theorem_limit, ApiConfig, ErrorInjector, EvaluationMethod, InjectorMode,
};
use avgrl_core::harness::{generate_random_mdp, RandomMdpSpec};
use avgrl_core::mdp::{optimal_by_enumeration, Mdp};
use avgrl_core::regret::{
    decompose_regret, ledger_from_trace, optimize_tau, pseudo_regret, pseudo_regret_bound,
};
use avgrl_core::rl::{run_policy_based, FeatureMap, InitialQ, PolicyUpdateRule, RlConfig, RlEvaluation, TdConfig, UpdateKind};
use avgrl_core::transforms::standard_pipeline;

fn model(n: usize, m: usize, seed: u64) -> Mdp<f64> {
    standard_pipeline(&generate_random_mdp(&RandomMdpSpec::new(n, m, seed)).unwrap(), None, Some(0.1)).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn injected_errors_stay_within_budget(n in 1usize..5, m in 1usize..4, seed in any::<u64>(),
                                          eps in 0.0f64..0.2, delta in 0.0f64..0.2, worst in any::<bool>()) {
        let mdp = model(n, m, seed);
        let mode = if worst { InjectorMode::WorstWithinBudget } else { InjectorMode::RandomWithinBudget };
        let inj = ErrorInjector { improvement_eps: eps, evaluation_delta: delta, mode, seed };
        let t = run_api(&mdp, &vec![0.0; n], &inj, &ApiConfig { iterations: 30, ..ApiConfig::default() }).unwrap();
        for r in &t.rows {
            prop_assert!(r.eps_realized <= eps + 1e-12);
            prop_assert!(r.delta_realized <= delta + 1e-12);
        }
        let cert = certify(&t, 1e-9).unwrap();
        prop_assert!(cert.passed(), "{:?}", cert.first_violation());
    }

    #[test]
    fn theorem_bound_decreases_to_its_limit(gamma in 0.01f64..1.0, eps in 0.0f64..0.5, delta in 0.0f64..0.5,
                                             excess in 0.0f64..5.0) {
        let limit = theorem_limit(gamma, eps, delta).unwrap();
        prop_assert!((limit - ((1.0 + gamma) * eps + 2.0 * delta) / gamma).abs() <= 1e-12 * (1.0 + limit));
        // J* − l0 + ε at or above the limit makes the bound non-increasing
        let gap0 = limit - eps + excess;
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let b = theorem_bound(k, gamma, eps, delta, gap0, 0.0).unwrap();
            prop_assert!(b <= prev + 1e-12 * (1.0 + prev.abs()));
            prop_assert!(b >= limit - 1e-12 * (1.0 + limit));
            prev = b;
        }
    }

    #[test]
    fn regret_parts_add_up(gains in prop::collection::vec(0.0f64..1.0, 1..8), tau in 1usize..20,
                           noise in prop::collection::vec(-1.0f64..1.0, 160), j_star in 1.0f64..2.0) {
        let rewards: Vec<f64> = (0..gains.len() * tau).map(|i| gains[i / tau] + noise[i % 160]).collect();
        let (pseudo, est) = decompose_regret(&rewards, &gains, j_star).unwrap();
        let total: f64 = rewards.iter().map(|r| j_star - r).sum();
        prop_assert!((pseudo + est - total).abs() <= 1e-9 * rewards.len() as f64);
        prop_assert!((pseudo - pseudo_regret(&gains, tau, j_star)).abs() <= 1e-12 * (1.0 + pseudo.abs()));
    }

    #[test]
    fn regret_bound_is_monotone(k in 10usize..100_000, tau in 1usize..1000, gamma in 0.01f64..1.0,
                                c0 in 0.0f64..2.0, d0 in 0.0f64..0.5, omega in 0.01f64..1.0, c_hat in 0.0f64..5.0,
                                bump in 0.001f64..1.0) {
        let b = pseudo_regret_bound(k, tau, gamma, c0, d0, omega, c_hat).unwrap();
        prop_assert!(pseudo_regret_bound(k * 2, tau, gamma, c0, d0, omega, c_hat).unwrap() > b);
        prop_assert!(pseudo_regret_bound(k, tau, gamma, c0 + bump, d0, omega, c_hat).unwrap() > b);
        prop_assert!(pseudo_regret_bound(k, tau, gamma, c0, d0 + bump, omega, c_hat).unwrap() > b);
    }

    #[test]
    fn optimized_tau_is_in_range(k in 1usize..1_000_000, c0 in 0.001f64..5.0, c5 in 0.001f64..50.0) {
        let tau = optimize_tau(k, c0, c5).unwrap();
        prop_assert!((1..=k).contains(&tau));
    }
}

#[test]
fn exact_api_matches_enumeration_with_both_evaluators() {
    for seed in 0..8 {
        let mdp = model(4, 3, 40 + seed);
        let j_star = optimal_by_enumeration(&mdp, 0).unwrap().gain;
        for evaluation in [EvaluationMethod::Direct, EvaluationMethod::RelativeValueIteration] {
            let cfg = ApiConfig { iterations: 20, evaluation, ..ApiConfig::default() };
            let t = run_api(&mdp, &[0.0; 4], &ErrorInjector::exact(), &cfg).unwrap();
            let last = t.rows.last().unwrap();
            assert!((last.j_next - j_star).abs() < 1e-9, "seed {seed} {evaluation:?}");
            assert!(last.u - last.l < 1e-8);
        }
    }
}

#[test]
fn trace_ledger_recomputes() {
    let mdp = model(3, 2, 50);
    let cfg = RlConfig {
        rule: PolicyUpdateRule { kind: UpdateKind::MirrorDescent, beta: 3.0 },
        td: TdConfig::default(),
        tau: 400,
        iterations: 6,
        anchor: 0,
        seed: 2,
        evaluation: RlEvaluation::Td,
        lazify: None,
        initial_q: InitialQ::Zero,
    };
    let t = run_policy_based(&mdp, &FeatureMap::tabular(6), &cfg).unwrap();
    let ledger = ledger_from_trace(&t).unwrap();
    ledger.check().unwrap();
    assert_eq!(ledger.horizon_k, 400 * 6);
    assert!(ledger.pseudo_regret >= -1e-12);
    assert!(ledger.total_regret().is_some());
}

#[test]
fn generator_is_deterministic_and_concentration_flattens_rows() {
    let spec = RandomMdpSpec::new(5, 2, 77);
    let a: Mdp<f64> = generate_random_mdp(&spec).unwrap();
    let b: Mdp<f64> = generate_random_mdp(&spec).unwrap();
    assert_eq!(a.to_json_string(), b.to_json_string());
    let flat = RandomMdpSpec { concentration: 1e6, ..spec };
    let f: Mdp<f64> = generate_random_mdp(&flat).unwrap();
    assert!(f.transitions_flat().iter().all(|p| (p - 0.2).abs() < 5e-3));
    assert!(generate_random_mdp::<f64>(&RandomMdpSpec::new(0, 2, 1)).is_err());
    assert!(generate_random_mdp::<f64>(&RandomMdpSpec { reward_lo: 2.0, reward_hi: 1.0, ..spec }).is_err());
}
