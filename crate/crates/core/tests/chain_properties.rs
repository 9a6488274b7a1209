use gcfs_core::markov::{
    balance_residual, boundary_chi, chain_mean_delay, global_balance_residual,
    recurrence_residual, steady_state_closed_form_a1, steady_state_roots, steady_state_truncated,
    transition_prob, ztransform, ChainParams,
};
use gcfs_core::TrafficModel;
use proptest::prelude::*;

fn chain() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (1usize..=4)
        .prop_flat_map(|a| (prop::collection::vec(0.0f64..1.0, a + 1), 0.05f64..=1.0))
        .prop_map(|(w, p)| {
            let mut w = w;
            // keep the top batch and the total mass away from zero
            let last = w.len() - 1;
            w[last] += 0.05;
            let s: f64 = w.iter().sum();
            (w.iter().map(|x| x / s).collect(), p)
        })
}

fn chi_of(probs: &[f64], tail: f64) -> Vec<f64> {
    let mut chi = vec![0.0; probs.len() + 1];
    chi[probs.len()] = tail;
    for i in (0..probs.len()).rev() {
        chi[i] = chi[i + 1] + probs[i];
    }
    chi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_are_stochastic((theta, p) in chain()) {
        let c = ChainParams::new(theta, p).unwrap();
        let a = c.max_arrivals();
        for i in 0..3 * a + 3 {
            let s: f64 = (0..=i + a).map(|j| transition_prob(i, j, &c)).sum();
            prop_assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficient_gap_is_p((theta, p) in chain()) {
        let c = ChainParams::new(theta, p).unwrap();
        let (lead, cs) = c.recurrence();
        prop_assert!((lead - cs.iter().sum::<f64>() - p).abs() < 1e-15);
        prop_assert!((cs.iter().sum::<f64>() - c.theta0_bar() * c.p_bar()).abs() < 1e-15);
    }

    #[test]
    fn solvers_agree((theta, p) in chain()) {
        let c = ChainParams::new(theta.clone(), p).unwrap();
        let k = c.default_truncation();
        let t = steady_state_truncated(&c, k, 1e-12).unwrap();
        let r = steady_state_roots(&c, k).unwrap();
        for i in 0..=k.min(t.truncation()) {
            prop_assert!((t.get(i) - r.get(i)).abs() < 1e-8, "state {}", i);
        }
        if theta.len() == 2 {
            let cf = steady_state_closed_form_a1(theta[1], p).unwrap();
            for i in 0..=k {
                prop_assert!((cf.get(i) - r.get(i)).abs() < 1e-10);
                prop_assert!((cf.get(i) - t.get(i)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stationary_law_is_consistent((theta, p) in chain()) {
        let c = ChainParams::new(theta, p).unwrap();
        let t = steady_state_truncated(&c, c.default_truncation(), 1e-12).unwrap();
        prop_assert!((t.total_mass() + t.tail_bound() - 1.0).abs() < 1e-8);
        prop_assert!(t.probs().iter().all(|&x| x >= 0.0));
        prop_assert!((t.chi(0) - 1.0).abs() < 1e-8);
        prop_assert!(global_balance_residual(&t, &c) < 1e-8);
        prop_assert!(balance_residual(&t, &c) < 1e-8);
        let chi = chi_of(t.probs(), t.tail_bound());
        prop_assert!(recurrence_residual(&chi, &c) < 1e-8);
        // boundary values agree with the solved tail sums
        for (i, b) in boundary_chi(&c).iter().enumerate() {
            prop_assert!((chi[i] - b).abs() < 1e-8);
        }
    }

    #[test]
    fn root_solution_satisfies_recurrence((theta, p) in chain()) {
        let c = ChainParams::new(theta, p).unwrap();
        let r = steady_state_roots(&c, c.default_truncation()).unwrap();
        let chi = chi_of(r.probs(), r.tail_bound());
        prop_assert!(recurrence_residual(&chi, &c) < 1e-8);
        prop_assert!(global_balance_residual(&r, &c) < 1e-8);
    }

    #[test]
    fn delay_identity((theta, p) in chain()) {
        let traffic = TrafficModel::new(theta, 1.0).unwrap();
        let c = ChainParams::from_traffic(&traffic, p).unwrap();
        let t = steady_state_truncated(&c, c.default_truncation(), 1e-12).unwrap();
        let d = chain_mean_delay(&t, &traffic).unwrap();
        prop_assert!((d - (1.0 - p) / p).abs() < 1e-6);
    }

    #[test]
    fn generating_function_series((theta, p) in chain()) {
        let c = ChainParams::new(theta, p).unwrap();
        let t = steady_state_truncated(&c, c.default_truncation(), 1e-13).unwrap();
        let chi = chi_of(t.probs(), t.tail_bound());
        for (i, z) in ztransform::chi_series(&c, 101).iter().enumerate() {
            prop_assert!((z - chi[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn boundary_matches_oracle_tail_sums() {
    let c = ChainParams::new(vec![0.25, 0.5, 0.25], 0.5).unwrap();
    let t = steady_state_truncated(&c, 200, 1e-12).unwrap();
    assert!((boundary_chi(&c)[1] - 0.375 / 0.875).abs() < 1e-15);
    assert!((t.chi(1) - 0.375 / 0.875).abs() < 1e-10);

    // with p = 1 nothing is ever left over, so χ_1 = 0
    let c = ChainParams::new(vec![0.25, 0.5, 0.25], 1.0).unwrap();
    let t = steady_state_truncated(&c, 200, 1e-12).unwrap();
    assert_eq!(boundary_chi(&c)[1], 0.0);
    assert_eq!(t.chi(1), 0.0);
}

#[test]
fn three_arrival_roots_match_oracle() {
    let c = ChainParams::new(vec![0.1, 0.3, 0.2, 0.4], 0.7).unwrap();
    let k = c.default_truncation();
    let r = steady_state_roots(&c, k).unwrap();
    let t = steady_state_truncated(&c, k, 1e-12).unwrap();
    for i in 0..=k {
        assert!((r.get(i) - t.get(i)).abs() < 1e-8);
    }
}

#[test]
fn slot_process_matches_transition_law() {
    // two-outcome slot: serve w.p. p, else add Bernoulli arrivals
    use rand::{Rng, SeedableRng};
    let c = ChainParams::new(vec![0.4, 0.6], 0.5).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let n = 400_000;
    let mut hits = 0u32;
    for _ in 0..n {
        let served = rng.random::<f64>() < 0.5;
        let arrive = rng.random::<f64>() < 0.6;
        if !served && arrive {
            hits += 1;
        }
    }
    let freq = f64::from(hits) / f64::from(n);
    // 3σ ≈ 0.0022
    assert!((freq - transition_prob(2, 3, &c)).abs() < 0.003);
}
