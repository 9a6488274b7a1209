use gcfs_core::models::{Rayleigh, Uniform};
use gcfs_core::rate_bits_per_symbol;
use gcfs_core::sim::{gcfs_plan, threshold_plan, Planner, Policy, SimState, SlotPlan};
use gcfs_core::{Channel, Scenario, SystemParams, TrafficModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bits delivered when users are served strictly in `order` with the same
/// clear-then-partial rule.
fn served_in_order(order: &[usize], demand: &[f64], rates: &[f64], budget: f64) -> f64 {
    let mut left = budget;
    let mut total = 0.0;
    for &i in order {
        if demand[i] <= 0.0 || rates[i] <= 0.0 {
            continue;
        }
        let v = demand[i] / rates[i];
        if v <= left {
            left -= v;
            total += demand[i];
        } else {
            total += left * rates[i];
            break;
        }
    }
    total
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// A gain whose rate at ρ = 1 is exactly `bits`.
fn exact_gain(bits: u32) -> f64 {
    let target = f64::from(bits);
    let h = ((2f64).powi(bits as i32) - 1.0).sqrt();
    for step in 0..64i64 {
        for cand in [
            f64::from_bits((h.to_bits() as i64 + step) as u64),
            f64::from_bits((h.to_bits() as i64 - step) as u64),
        ] {
            if rate_bits_per_symbol(cand, 1.0).unwrap() == target {
                return cand;
            }
        }
    }
    panic!("no exact gain for {bits} bits near {h}");
}

#[test]
fn gcfs_beats_every_order_on_small_instances() {
    let levels = [0u32, 1, 2, 4];
    let gains: Vec<f64> = levels
        .iter()
        .map(|&b| if b == 0 { 0.0 } else { exact_gain(b) })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..300 {
        let n = rng.random_range(1..=4);
        let budget = f64::from(rng.random_range(1..=8u32));
        let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..levels.len())).collect();
        let h: Vec<f64> = pick.iter().map(|&k| gains[k]).collect();
        let rates: Vec<f64> = pick.iter().map(|&k| f64::from(levels[k])).collect();
        let q: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u32))).collect();
        let a: Vec<u32> = (0..n).map(|_| rng.random_range(0..3u32)).collect();
        let demand: Vec<f64> = q.iter().zip(&a).map(|(q, a)| q + f64::from(*a)).collect();
        let plan = gcfs_plan(&q, &a, 1.0, &h, 1.0, budget);
        let users: Vec<usize> = (0..n).collect();
        for order in permutations(&users) {
            let alt = served_in_order(&order, &demand, &rates, budget);
            assert!(plan.total_bits >= alt, "{plan:?} vs {order:?} -> {alt}");
        }
    }
}

fn check_plan(plan: &SlotPlan, demand: &[f64], gains: &[f64], snr: f64, budget: f64) {
    let mut used = plan.idle_symbols;
    for &i in plan.served() {
        assert_eq!(plan.served_bits[i], demand[i]);
        used += demand[i] / rate_bits_per_symbol(gains[i], snr).unwrap();
    }
    if let Some(p) = plan.partial {
        used += p.symbols;
        assert!(p.bits <= demand[p.user]);
        assert_eq!(plan.served_bits[p.user], p.bits);
        assert_eq!(plan.idle_symbols, 0.0);
    }
    assert!((used - budget).abs() <= 1e-9 * budget);
    for (i, &s) in plan.served_bits.iter().enumerate() {
        assert!(s >= 0.0 && s <= demand[i]);
        if !plan.order.contains(&i) {
            assert_eq!(s, 0.0);
        }
    }
    let total: f64 = plan.served_bits.iter().sum();
    assert!((total - plan.total_bits).abs() <= 1e-9 * total.max(1.0));
    // an idle symbol means every candidate was cleared
    if plan.idle_symbols > 0.0 {
        for (i, &d) in demand.iter().enumerate() {
            if d > 0.0 && gains[i] > 0.0 {
                assert_eq!(plan.served_bits[i], d);
            }
        }
    }
    for w in plan.order.windows(2) {
        assert!(gains[w[0]] > gains[w[1]] || (gains[w[0]] == gains[w[1]] && w[0] < w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn plan_invariants(
        q in prop::collection::vec(0.0f64..50.0, 1..40),
        seed in any::<u64>(),
        budget in 0.5f64..200.0,
        log_snr in 0.0f64..20.0,
    ) {
        let n = q.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let h: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random::<f64>() * 3.0 }).collect();
        let snr = log_snr.exp2();
        let demand: Vec<f64> = q.iter().zip(&a).map(|(q, a)| q + 2.0 * f64::from(*a)).collect();
        let plan = gcfs_plan(&q, &a, 2.0, &h, snr, budget);
        check_plan(&plan, &demand, &h, snr, budget);
        prop_assert_eq!(&threshold_plan(&q, &a, 2.0, &h, snr, budget, 0.0), &plan);
        let cut = 1.5;
        let tp = threshold_plan(&q, &a, 2.0, &h, snr, budget, cut);
        prop_assert!(tp.order.iter().all(|&i| h[i] > cut));
    }

    #[test]
    fn planner_reuse_is_transparent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut planner = Planner::new();
        let mut plan = SlotPlan::default();
        for _ in 0..5 {
            let n = rng.random_range(1..60);
            let q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
            let a: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let h: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
            let b = rng.random::<f64>() * 30.0 + 0.1;
            planner.plan_into(&q, &a, 1.0, &h, 10.0, b, Policy::Gcfs, &mut plan);
            prop_assert_eq!(&plan, &gcfs_plan(&q, &a, 1.0, &h, 10.0, b));
        }
    }
}

#[test]
fn queues_conserve_bits_and_stay_nonnegative() {
    let scenarios = [
        Scenario {
            channel: Channel::Rayleigh(Rayleigh),
            traffic: TrafficModel::new(vec![0.3, 0.3, 0.4], 3.0).unwrap(),
            system: SystemParams::new(60, 1.0, 4.0, 50.0, 1.0).unwrap(),
        },
        Scenario {
            channel: Channel::Uniform(Uniform::new(1.0).unwrap()),
            traffic: TrafficModel::bernoulli(0.9, 1.0).unwrap(),
            system: SystemParams::new(30, 1.0, 5.0, 3.0, 1.0).unwrap(),
        },
    ];
    for (k, s) in scenarios.iter().enumerate() {
        for policy in [Policy::Gcfs, Policy::Threshold(0.5)] {
            let mut st = SimState::new(s.system.users(), k as u64);
            let mut before: f64 = 0.0;
            for _ in 0..500 {
                let plan = st.step(s, policy).clone();
                let arrived: f64 = st.arrivals().iter().map(|&a| f64::from(a)).sum::<f64>()
                    * s.traffic.packet_bits();
                let after: f64 = st.queues().iter().sum();
                let expect = before + arrived - plan.total_bits;
                assert!((after - expect).abs() <= 1e-9 * expect.abs().max(1.0));
                assert!(st.queues().iter().all(|&q| q >= 0.0));
                for (n, q) in st.queues().iter().enumerate() {
                    assert_eq!(*q, st.demand()[n] - plan.served_bits[n]);
                }
                before = after;
            }
        }
    }
}

#[test]
fn user_streams_do_not_depend_on_population() {
    let traffic = TrafficModel::bernoulli(0.5, 1.0).unwrap();
    let small = Scenario {
        channel: Channel::Rayleigh(Rayleigh),
        traffic: traffic.clone(),
        system: SystemParams::new(3, 1.0, 1.0, 1.0, 1.0).unwrap(),
    };
    let large = Scenario {
        system: SystemParams::new(10, 1.0, 1.0, 1.0, 1.0).unwrap(),
        ..small.clone()
    };
    let mut a = SimState::new(3, 77);
    let mut b = SimState::new(10, 77);
    for _ in 0..50 {
        a.step(&small, Policy::Gcfs);
        b.step(&large, Policy::Gcfs);
        assert_eq!(a.gains(), &b.gains()[..3]);
        assert_eq!(a.arrivals(), &b.arrivals()[..3]);
    }
}

#[test]
fn shuffled_inputs_give_permuted_plans() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 25;
    let q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 8.0).collect();
    let h: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 + 0.01).collect();
    let a = vec![0u32; n];
    let plan = gcfs_plan(&q, &a, 1.0, &h, 20.0, 12.0);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let q2: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
    let h2: Vec<f64> = perm.iter().map(|&i| h[i]).collect();
    let plan2 = gcfs_plan(&q2, &a, 1.0, &h2, 20.0, 12.0);
    assert_eq!(plan.total_bits, plan2.total_bits);
    let back: Vec<usize> = plan2.order.iter().map(|&j| perm[j]).collect();
    assert_eq!(back, plan.order);
}
