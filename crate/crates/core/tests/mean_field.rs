use gcfs_core::meanfield::{default_tolerance, phi, phi_sup, solve_threshold, Status};
use gcfs_core::models::{Rayleigh, Tabulated, Uniform};
use gcfs_core::{Channel, ChannelModel, SystemParams, TrafficModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn phi_at_zero_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 10_000_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let h = Rayleigh.sample(&mut rng);
        acc += (h * h).ln_1p();
    }
    let mc = 1e3 * acc / f64::from(n) / std::f64::consts::LN_2;
    let v = phi(&Rayleigh, 1.0, 1e3, 0.0).unwrap();
    assert!(((v - mc) / mc).abs() < 1e-3, "{v} vs {mc}");
}

#[test]
fn rayleigh_threshold_matches_grid_scan() {
    let traffic = TrafficModel::bernoulli(0.6, 1.0).unwrap();
    let system = SystemParams::new(5000, 1.0, 1e3, 4.0, 1.0).unwrap();
    let tol = default_tolerance(&traffic, &system);
    let s = solve_threshold(&Rayleigh, &traffic, &system, tol).unwrap();
    assert_eq!(s.status, Status::Balanced);
    assert!(s.residual <= tol);
    let load = 3000.0;
    let snr = system.snr();
    // first grid point where Φ crosses the load
    let hi = 6.0;
    let step = hi / 1e5;
    let mut prev = phi(&Rayleigh, snr, 1e3, 0.0).unwrap();
    let mut cross = None;
    for k in 1..=100_000 {
        let h = k as f64 * step;
        let v = phi(&Rayleigh, snr, 1e3, h).unwrap();
        if prev < load && v >= load {
            cross = Some(h);
            break;
        }
        prev = v;
    }
    let cross = cross.expect("grid brackets the root");
    assert!((s.threshold - cross).abs() <= step, "{} vs {}", s.threshold, cross);
}

#[test]
fn more_power_never_raises_delay() {
    let traffic = TrafficModel::bernoulli(0.5, 1.0).unwrap();
    let mut last = f64::INFINITY;
    for k in 0..30 {
        let power = 2f64.powf(f64::from(k) * 0.5);
        let system = SystemParams::new(200, 1.0, 10.0, power, 1.0).unwrap();
        let s = solve_threshold(&Rayleigh, &traffic, &system, 1e-9).unwrap();
        let d = s.delay_slots.unwrap();
        assert!(d <= last + 1e-9, "power {power}: {d} > {last}");
        last = d;
    }
    assert_eq!(last, 0.0);
}

#[test]
fn uniform_support_end_is_finite() {
    let u = Uniform::new(3f64.sqrt()).unwrap();
    assert!((phi_sup(&u, 1.0, 10.0) - 20.0).abs() < 1e-12);
    assert!(phi_sup(&Rayleigh, 1.0, 1.0).is_infinite());
}

fn channel() -> impl Strategy<Value = Channel> {
    prop_oneof![
        Just(Channel::Rayleigh(Rayleigh)),
        (0.2f64..5.0).prop_map(|h| Channel::Uniform(Uniform::new(h).unwrap())),
        prop::collection::vec(0.0f64..2.0, 3..7).prop_map(|d| {
            let knots: Vec<f64> = (0..d.len()).map(|k| 0.5 * k as f64).collect();
            let mut d = d;
            d[1] += 0.1;
            Channel::Tabulated(Tabulated::new(knots, d).unwrap())
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn phi_is_non_decreasing(
        c in channel(),
        log_snr in -5.0f64..40.0,
        u1 in 0.0f64..1.0,
        u2 in 0.0f64..1.0,
    ) {
        let snr = log_snr.exp2();
        let top = if c.support_sup().is_finite() { c.support_sup() } else { 8.0 };
        let (a, b) = if u1 < u2 { (u1, u2) } else { (u2, u1) };
        let (h1, h2) = (a * top * 0.999, b * top * 0.999);
        prop_assume!(c.tail(h2) > 0.0);
        let p1 = phi(&c, snr, 1.0, h1).unwrap();
        let p2 = phi(&c, snr, 1.0, h2).unwrap();
        prop_assert!(p1 <= p2 + 1e-9, "{} > {}", p1, p2);
    }

    #[test]
    fn balanced_solutions_close_the_loop(
        theta1 in 0.1f64..1.0,
        log_snr in 5.0f64..30.0,
        reach in 0.0f64..1.0,
    ) {
        // load per symbol up to 8 bits beyond log2 ρ keeps G(h_th) >= e^-128
        let per_symbol = 0.5 + reach * (log_snr + 7.5);
        let users = ((50.0 * per_symbol / theta1).round() as usize).max(1);
        let traffic = TrafficModel::bernoulli(theta1, 1.0).unwrap();
        let system = SystemParams::new(users, 1.0, 50.0, log_snr.exp2(), 1.0).unwrap();
        let tol = default_tolerance(&traffic, &system);
        let s = solve_threshold(&Rayleigh, &traffic, &system, tol).unwrap();
        match s.status {
            Status::Balanced => {
                let v = phi(&Rayleigh, system.snr(), 50.0, s.threshold).unwrap();
                prop_assert!((v - s.load_bits).abs() <= tol);
                prop_assert_eq!(s.service_prob, Rayleigh.tail(s.threshold));
                let d = s.delay_slots.unwrap();
                prop_assert!((d - (1.0 / s.service_prob - 1.0)).abs() < 1e-12);
            }
            Status::OverProvisioned => {
                prop_assert_eq!(s.threshold, 0.0);
                prop_assert_eq!(s.delay_slots, Some(0.0));
            }
            Status::Unstable => prop_assert!(false, "Rayleigh support is unbounded"),
        }
    }
}
