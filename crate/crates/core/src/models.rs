//! Physical-layer and traffic primitives.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use rand::Rng;

use crate::math;
use crate::{Error, Result};

/// Shannon rate `log2(1 + h²ρ)` in bits per channel symbol.
pub fn rate_bits_per_symbol(gain: f64, snr: f64) -> Result<f64> {
    if !(gain >= 0.0) || !gain.is_finite() {
        return Err(Error::Domain {
            what: "channel gain",
            value: gain,
        });
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::Domain {
            what: "snr",
            value: snr,
        });
    }
    Ok(rate(gain, snr))
}

/// Unchecked rate for hot paths; callers guarantee `gain >= 0`, `snr > 0`.
#[inline]
pub(crate) fn rate(gain: f64, snr: f64) -> f64 {
    math::log1p(gain * gain * snr) / LN_2
}

/// Distribution of the channel gain magnitude `h >= 0` in one slot.
///
/// Gains are i.i.d. across users and slots (block fading).
pub trait ChannelModel {
    /// Density `f(h)`.
    fn pdf(&self, h: f64) -> f64;

    /// Distribution function `F(h)`.
    fn cdf(&self, h: f64) -> f64;

    /// Tail `G(h) = 1 - F(h)`. Implementations override this when the tail
    /// can be computed without cancellation.
    fn tail(&self, h: f64) -> f64 {
        1.0 - self.cdf(h)
    }

    /// `h_u = sup{h | G(h) > 0}`, possibly `f64::INFINITY`.
    fn support_sup(&self) -> f64;

    /// Draws one gain.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;

    /// Interior points where the density is not smooth.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }

    /// Smallest `h` with `G(h) <= tail_prob`.
    fn upper_quantile(&self, tail_prob: f64) -> f64 {
        let hu = self.support_sup();
        if hu.is_finite() {
            return bisect_tail(self, 0.0, hu, tail_prob);
        }
        let mut hi = 1.0;
        while self.tail(hi) > tail_prob && hi < 1e300 {
            hi *= 2.0;
        }
        bisect_tail(self, 0.0, hi, tail_prob)
    }

    /// Estimate of `∫_h^∞ f(x) log2(1 + x²ρ) dx` for a cut point `h` deep
    /// in an infinite tail. The default `G(h)·log2(1 + h²ρ)` is a lower
    /// bound for any distribution.
    fn rate_tail_estimate(&self, h: f64, snr: f64) -> f64 {
        self.tail(h) * rate(h, snr)
    }
}

fn bisect_tail<C: ChannelModel + ?Sized>(c: &C, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if c.tail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Rayleigh fading with unit scale: `f(h) = h·exp(-h²/2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rayleigh;

impl ChannelModel for Rayleigh {
    fn pdf(&self, h: f64) -> f64 {
        if h < 0.0 {
            0.0
        } else {
            h * math::exp(-0.5 * h * h)
        }
    }

    fn cdf(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            -math::expm1(-0.5 * h * h)
        }
    }

    fn tail(&self, h: f64) -> f64 {
        if h <= 0.0 {
            1.0
        } else {
            math::exp(-0.5 * h * h)
        }
    }

    fn support_sup(&self) -> f64 {
        f64::INFINITY
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1 - U lies in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        math::sqrt(-2.0 * math::log(u))
    }

    fn upper_quantile(&self, tail_prob: f64) -> f64 {
        if tail_prob >= 1.0 {
            0.0
        } else {
            math::sqrt(-2.0 * math::log(tail_prob))
        }
    }

    // With u = h²/2 the tail is ∫_U^∞ e^{-u} log2(1 + 2ρu) du. The rate is
    // concave in u, so its tangent at U bounds it from above; this returns
    // the midpoint of that bound and the trivial lower bound.
    fn rate_tail_estimate(&self, h: f64, snr: f64) -> f64 {
        let g = self.tail(h);
        let r = rate(h, snr);
        let slope = 2.0 * snr / ((1.0 + h * h * snr) * LN_2);
        g * (r + 0.5 * slope)
    }
}

/// Uniform gain on `[0, h_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    h_max: f64,
}

impl Uniform {
    pub fn new(h_max: f64) -> Result<Self> {
        if !(h_max > 0.0) || !h_max.is_finite() {
            return Err(Error::InvalidParameter {
                name: "h_max",
                reason: "must be positive and finite",
            });
        }
        Ok(Self { h_max })
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }
}

impl ChannelModel for Uniform {
    fn pdf(&self, h: f64) -> f64 {
        if (0.0..=self.h_max).contains(&h) {
            1.0 / self.h_max
        } else {
            0.0
        }
    }

    fn cdf(&self, h: f64) -> f64 {
        (h / self.h_max).clamp(0.0, 1.0)
    }

    fn tail(&self, h: f64) -> f64 {
        ((self.h_max - h) / self.h_max).clamp(0.0, 1.0)
    }

    fn support_sup(&self) -> f64 {
        self.h_max
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.h_max * rng.random::<f64>()
    }
}

/// Density given at knots `(h_k, d_k)` and linearly interpolated between
/// them (zero outside), renormalized to unit mass.
///
/// Linear interpolation never overshoots the knot values, so the density is
/// nonnegative and monotone on every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    knots: Vec<f64>,
    density: Vec<f64>,
    /// `cum[k] = F(knots[k])`
    cum: Vec<f64>,
    sup: f64,
}

impl Tabulated {
    pub fn new(knots: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if knots.len() != density.len() {
            return Err(Error::InvalidParameter {
                name: "table",
                reason: "knot and density columns differ in length",
            });
        }
        if knots.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "table",
                reason: "needs at least two knots",
            });
        }
        if knots.iter().any(|h| !(*h >= 0.0) || !h.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "table",
                reason: "gains must be finite and nonnegative",
            });
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "table",
                reason: "gains must be strictly increasing",
            });
        }
        if density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "table",
                reason: "densities must be finite and nonnegative",
            });
        }
        let mut cum = Vec::with_capacity(knots.len());
        cum.push(0.0);
        for k in 1..knots.len() {
            let area = 0.5 * (density[k] + density[k - 1]) * (knots[k] - knots[k - 1]);
            cum.push(cum[k - 1] + area);
        }
        let total = cum[cum.len() - 1];
        if !(total > 0.0) {
            return Err(Error::InvalidParameter {
                name: "table",
                reason: "density has zero mass",
            });
        }
        let density: Vec<f64> = density.into_iter().map(|d| d / total).collect();
        for c in cum.iter_mut() {
            *c /= total;
        }
        // last segment carrying mass
        let last = (1..knots.len())
            .rev()
            .find(|&k| density[k] > 0.0 || density[k - 1] > 0.0)
            .unwrap_or(knots.len() - 1);
        let sup = knots[last];
        Ok(Self {
            knots,
            density,
            cum,
            sup,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn segment(&self, h: f64) -> Option<usize> {
        if h < self.knots[0] || h >= self.knots[self.knots.len() - 1] {
            return None;
        }
        let k = self.knots.partition_point(|&x| x <= h);
        Some(k - 1)
    }
}

impl ChannelModel for Tabulated {
    fn pdf(&self, h: f64) -> f64 {
        match self.segment(h) {
            Some(k) => {
                let (h0, h1) = (self.knots[k], self.knots[k + 1]);
                let t = (h - h0) / (h1 - h0);
                self.density[k] + t * (self.density[k + 1] - self.density[k])
            }
            None if h == self.knots[self.knots.len() - 1] => self.density[self.density.len() - 1],
            None => 0.0,
        }
    }

    fn cdf(&self, h: f64) -> f64 {
        match self.segment(h) {
            Some(k) => {
                let dx = h - self.knots[k];
                let slope = (self.density[k + 1] - self.density[k]) / (self.knots[k + 1] - self.knots[k]);
                (self.cum[k] + self.density[k] * dx + 0.5 * slope * dx * dx).min(1.0)
            }
            None if h < self.knots[0] => 0.0,
            None => 1.0,
        }
    }

    fn support_sup(&self) -> f64 {
        self.sup
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self.cum.partition_point(|&c| c <= u).clamp(1, self.cum.len() - 1) - 1;
        let (h0, h1) = (self.knots[k], self.knots[k + 1]);
        let (d0, d1) = (self.density[k], self.density[k + 1]);
        let need = u - self.cum[k];
        let slope = (d1 - d0) / (h1 - h0);
        // solve d0·x + slope·x²/2 = need for x in [0, h1 - h0]
        let x = if slope.abs() < 1e-300 {
            if d0 > 0.0 {
                need / d0
            } else {
                0.0
            }
        } else {
            let disc = (d0 * d0 + 2.0 * slope * need).max(0.0);
            // numerically stable root of the quadratic
            2.0 * need / (d0 + math::sqrt(disc))
        };
        (h0 + x).clamp(h0, h1)
    }

    fn breakpoints(&self) -> &[f64] {
        &self.knots
    }
}

/// The channel models the crate ships with.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Rayleigh(Rayleigh),
    Uniform(Uniform),
    Tabulated(Tabulated),
}

macro_rules! delegate {
    ($self:ident, $c:ident => $e:expr) => {
        match $self {
            Channel::Rayleigh($c) => $e,
            Channel::Uniform($c) => $e,
            Channel::Tabulated($c) => $e,
        }
    };
}

impl ChannelModel for Channel {
    fn pdf(&self, h: f64) -> f64 {
        delegate!(self, c => c.pdf(h))
    }
    fn cdf(&self, h: f64) -> f64 {
        delegate!(self, c => c.cdf(h))
    }
    fn tail(&self, h: f64) -> f64 {
        delegate!(self, c => c.tail(h))
    }
    fn support_sup(&self) -> f64 {
        delegate!(self, c => c.support_sup())
    }
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        delegate!(self, c => c.sample(rng))
    }
    fn breakpoints(&self) -> &[f64] {
        delegate!(self, c => c.breakpoints())
    }
    fn upper_quantile(&self, tail_prob: f64) -> f64 {
        delegate!(self, c => c.upper_quantile(tail_prob))
    }
    fn rate_tail_estimate(&self, h: f64, snr: f64) -> f64 {
        delegate!(self, c => c.rate_tail_estimate(h, snr))
    }
}

/// Per-user packet arrivals: `θ_a = Pr{a packets arrive in a slot}` for
/// `a = 0..=A`, each packet carrying `L` bits.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficModel {
    theta: Vec<f64>,
    packet_bits: f64,
    cumulative: Vec<f64>,
}

impl TrafficModel {
    pub fn new(theta: Vec<f64>, packet_bits: f64) -> Result<Self> {
        validate_pmf(&theta, "theta")?;
        if theta.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: "needs at least two entries (A >= 1)",
            });
        }
        if !(theta[theta.len() - 1] > 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: "last entry must be positive (A is the maximum batch)",
            });
        }
        if !(packet_bits > 0.0) || !packet_bits.is_finite() {
            return Err(Error::InvalidParameter {
                name: "packet_bits",
                reason: "must be positive and finite",
            });
        }
        let mut acc = 0.0;
        let cumulative = theta
            .iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect();
        Ok(Self {
            theta,
            packet_bits,
            cumulative,
        })
    }

    /// Bernoulli arrivals: one packet with probability `theta1`.
    pub fn bernoulli(theta1: f64, packet_bits: f64) -> Result<Self> {
        if !(theta1 > 0.0 && theta1 <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "theta1",
                reason: "must lie in (0, 1]",
            });
        }
        Self::new(alloc::vec![1.0 - theta1, theta1], packet_bits)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Largest batch size `A`.
    pub fn max_arrivals(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn packet_bits(&self) -> f64 {
        self.packet_bits
    }

    /// `Σ a·θ_a`, packets per slot.
    pub fn mean_packets(&self) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(a, t)| a as f64 * t)
            .sum()
    }

    /// `λ = L·Σ a·θ_a`, bits per slot.
    pub fn mean_arrival_bits(&self) -> f64 {
        self.packet_bits * self.mean_packets()
    }

    /// Draws a packet count in `0..=A`.
    pub fn sample_arrivals<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let a = self.cumulative.partition_point(|&c| c <= u);
        a.min(self.max_arrivals()) as u32
    }
}

pub(crate) fn validate_pmf(p: &[f64], name: &'static str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidParameter {
            name,
            reason: "must not be empty",
        });
    }
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter {
            name,
            reason: "entries must be finite and nonnegative",
        });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter {
            name,
            reason: "entries must sum to 1",
        });
    }
    Ok(())
}

/// Downlink parameters shared by all users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    users: usize,
    bandwidth: f64,
    slot_duration: f64,
    power: f64,
    noise: f64,
}

impl SystemParams {
    /// `users` = N, `bandwidth` = W (symbols/s), `slot_duration` = T (s),
    /// transmit `power` and receiver `noise` power.
    pub fn new(
        users: usize,
        bandwidth: f64,
        slot_duration: f64,
        power: f64,
        noise: f64,
    ) -> Result<Self> {
        fn positive(x: f64, name: &'static str) -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be positive and finite",
                })
            }
        }
        if users == 0 {
            return Err(Error::InvalidParameter {
                name: "users",
                reason: "must be positive",
            });
        }
        positive(bandwidth, "bandwidth")?;
        positive(slot_duration, "slot_duration")?;
        positive(power, "power")?;
        positive(noise, "noise")?;
        let p = Self {
            users,
            bandwidth,
            slot_duration,
            power,
            noise,
        };
        positive(p.snr(), "power/noise")?;
        Ok(p)
    }

    pub fn users(&self) -> usize {
        self.users
    }
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }
    pub fn power(&self) -> f64 {
        self.power
    }
    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// `ρ = P/σ²`.
    pub fn snr(&self) -> f64 {
        self.power / self.noise
    }

    /// `B = W·T` channel symbols per slot.
    pub fn symbols_per_slot(&self) -> f64 {
        self.bandwidth * self.slot_duration
    }

    /// Same system with a different transmit power.
    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(
            self.users,
            self.bandwidth,
            self.slot_duration,
            power,
            self.noise,
        )
    }
}
