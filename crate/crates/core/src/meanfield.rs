//! Mean-field threshold analysis.
//!
//! With many users the per-slot service decision of GCFS concentrates on a
//! channel-gain threshold `h_th`: a backlogged user is cleared when its gain
//! exceeds `h_th`, which happens with probability `p = G(h_th)`. The threshold
//! balances the deliverable bits per slot `Φ(h_th)` against the total
//! offered load `Nλ`.

use crate::math;
use crate::models::{rate, ChannelModel, SystemParams, TrafficModel};
use crate::{quad, Error, Result};

/// Relative accuracy of the `Φ` quadrature.
pub const PHI_REL_TOL: f64 = 1e-9;
/// Infinite supports are cut at `H*` with `G(H*) <= CUTOFF_TAIL·G(h_th)`.
pub const CUTOFF_TAIL: f64 = 1e-12;
/// Cap on bisection steps in [`solve_threshold`].
pub const MAX_ITERATIONS: usize = 10_000;

/// Outcome of the self-consistent threshold equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Status {
    /// `Φ(0) >= Nλ`: every backlogged user is served each slot.
    OverProvisioned,
    /// A threshold in `(0, h_u)` balances the load.
    Balanced,
    /// `Φ_sup <= Nλ`: the offered load exceeds what the channel can carry.
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanFieldSolution {
    pub threshold: f64,
    /// `p = G(h_th)`; zero when unstable.
    pub service_prob: f64,
    /// `q̄ = λ(1 - p)/p` bits; `None` when unstable.
    pub mean_queue_bits: Option<f64>,
    /// `D = 1/p - 1` slots; `None` when unstable.
    pub delay_slots: Option<f64>,
    pub status: Status,
    /// `|Φ(h_th) - Nλ|`; zero on the over-provisioned branch.
    pub residual: f64,
    /// Offered load `Nλ` in bits per slot.
    pub load_bits: f64,
    pub phi_sup: f64,
    /// `Nλ - Φ_sup`, the shortfall in bits per slot, when unstable.
    pub deficit_bits: Option<f64>,
    pub iterations: usize,
}

/// `Φ(h_th) = B·∫_{h_th}^∞ f(h) log2(1 + h²ρ) dh / G(h_th)`.
pub fn phi<C: ChannelModel + ?Sized>(
    channel: &C,
    snr: f64,
    symbols: f64,
    threshold: f64,
) -> Result<f64> {
    let hu = channel.support_sup();
    if !(threshold >= 0.0) || threshold >= hu {
        return Err(Error::Domain {
            what: "threshold",
            value: threshold,
        });
    }
    let g = channel.tail(threshold);
    if !(g > 0.0) {
        return Err(Error::Domain {
            what: "threshold (zero tail mass)",
            value: threshold,
        });
    }
    let integrand = |h: f64| channel.pdf(h) * rate(h, snr);
    let value = if hu.is_finite() {
        quad::integrate(integrand, threshold, hu, channel.breakpoints(), PHI_REL_TOL, 0.0)?.0
    } else {
        let cut = channel
            .upper_quantile((CUTOFF_TAIL * g).max(f64::from_bits(1)))
            .max(threshold + f64::EPSILON);
        let body = quad::integrate(integrand, threshold, cut, channel.breakpoints(), PHI_REL_TOL, 0.0)?.0;
        body + channel.rate_tail_estimate(cut, snr)
    };
    Ok(symbols * value / g)
}

/// `Φ_sup = B·log2(1 + h_u²ρ)`, infinite for unbounded support.
pub fn phi_sup<C: ChannelModel + ?Sized>(channel: &C, snr: f64, symbols: f64) -> f64 {
    let hu = channel.support_sup();
    if hu.is_finite() {
        symbols * rate(hu, snr)
    } else {
        f64::INFINITY
    }
}

/// Default stopping tolerance `10⁻⁶·Nλ`.
pub fn default_tolerance(traffic: &TrafficModel, system: &SystemParams) -> f64 {
    1e-6 * system.users() as f64 * traffic.mean_arrival_bits()
}

/// `D = 1/p - 1`.
pub fn predicted_delay(service_prob: f64) -> Result<f64> {
    if !(service_prob > 0.0 && service_prob <= 1.0) {
        return Err(Error::Domain {
            what: "service probability",
            value: service_prob,
        });
    }
    Ok(1.0 / service_prob - 1.0)
}

/// Solves `Φ(h_th) = Nλ` by bisection.
///
/// Returns `h_th = 0` when `Φ(0) >= Nλ` and `h_th = h_u` (status
/// [`Status::Unstable`]) when `Φ_sup <= Nλ`. For unbounded support the
/// right end of the bracket starts where `G = 10⁻⁶` and doubles until `Φ`
/// exceeds the load.
pub fn solve_threshold<C: ChannelModel + ?Sized>(
    channel: &C,
    traffic: &TrafficModel,
    system: &SystemParams,
    tolerance: f64,
) -> Result<MeanFieldSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::Domain {
            what: "tolerance",
            value: tolerance,
        });
    }
    let snr = system.snr();
    let symbols = system.symbols_per_slot();
    let lambda = traffic.mean_arrival_bits();
    let load = system.users() as f64 * lambda;
    let sup = phi_sup(channel, snr, symbols);
    let hu = channel.support_sup();
    let phi_at = |h: f64| phi(channel, snr, symbols, h);

    let balanced = |threshold: f64, value: f64, iterations: usize| {
        let p = channel.tail(threshold);
        let delay = 1.0 / p - 1.0;
        MeanFieldSolution {
            threshold,
            service_prob: p,
            mean_queue_bits: Some(lambda * delay),
            delay_slots: Some(delay),
            status: Status::Balanced,
            residual: (value - load).abs(),
            load_bits: load,
            phi_sup: sup,
            deficit_bits: None,
            iterations,
        }
    };

    let phi0 = phi_at(0.0)?;
    if phi0 >= load {
        return Ok(MeanFieldSolution {
            threshold: 0.0,
            service_prob: 1.0,
            mean_queue_bits: Some(0.0),
            delay_slots: Some(0.0),
            status: Status::OverProvisioned,
            residual: 0.0,
            load_bits: load,
            phi_sup: sup,
            deficit_bits: None,
            iterations: 0,
        });
    }
    if sup <= load {
        return Ok(MeanFieldSolution {
            threshold: hu,
            service_prob: 0.0,
            mean_queue_bits: None,
            delay_slots: None,
            status: Status::Unstable,
            residual: load - sup,
            load_bits: load,
            phi_sup: sup,
            deficit_bits: Some(load - sup),
            iterations: 0,
        });
    }

    let mut lo = 0.0;
    let mut hi = if hu.is_finite() {
        hu
    } else {
        let mut h = channel.upper_quantile(1e-6);
        loop {
            let v = phi_at(h)?;
            if v > load {
                break h;
            }
            lo = h;
            // double, but back off while the tail mass underflows
            let mut step = h;
            while !(channel.tail(h + step) > 0.0) || !(h + step).is_finite() {
                step *= 0.5;
                if h + step == h {
                    return Err(Error::NoConvergence {
                        what: "threshold bracket expansion (service probability underflows)",
                        iterations: 0,
                        lo,
                        hi: h,
                    });
                }
            }
            h += step;
        }
    };

    let mut h = 0.5 * (lo + hi);
    for it in 1..=MAX_ITERATIONS {
        let v = phi_at(h)?;
        if (v - load).abs() <= tolerance {
            return Ok(balanced(h, v, it));
        }
        if v > load {
            hi = h;
        } else {
            lo = h;
        }
        let next = 0.5 * (lo + hi);
        if next == h {
            return Err(Error::NoConvergence {
                what: "threshold bisection",
                iterations: it,
                lo,
                hi,
            });
        }
        h = next;
    }
    Err(Error::NoConvergence {
        what: "threshold bisection",
        iterations: MAX_ITERATIONS,
        lo,
        hi,
    })
}

/// Smallest SNR at which the mean-field threshold yields service
/// probability `target_prob`, i.e. the `ρ` solving `Φ(G⁻¹(p); ρ) = Nλ`.
///
/// `Φ` grows with `ρ`, so this is a bisection on `log2 ρ`.
pub fn snr_for_service_prob<C: ChannelModel + ?Sized>(
    channel: &C,
    traffic: &TrafficModel,
    system: &SystemParams,
    target_prob: f64,
) -> Result<f64> {
    if !(target_prob > 0.0 && target_prob < 1.0) {
        return Err(Error::Domain {
            what: "target service probability",
            value: target_prob,
        });
    }
    let h = channel.upper_quantile(target_prob);
    let load = system.users() as f64 * traffic.mean_arrival_bits();
    let symbols = system.symbols_per_slot();
    let (mut lo, mut hi) = (-200.0f64, 1000.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(channel, math::exp2(mid), symbols, h)? > load {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(math::exp2(0.5 * (lo + hi)))
}
