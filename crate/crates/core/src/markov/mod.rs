//! The decoupled single-user queue.
//!
//! Each slot a user receives `a` packets with probability `θ_a` and, with
//! probability `p`, has its whole buffer cleared. The number of packets left
//! at the end of the slot is a Markov chain on `{0, 1, 2, ...}`:
//!
//! ```text
//! P(0, 0) = θ₀ + (1 - θ₀)p
//! P(i, i) = θ₀(1 - p)          i > 0
//! P(i, i + a) = θ_a(1 - p)     1 <= a <= A
//! P(i, 0) = p                  i > 0
//! ```
//!
//! Its stationary law is computed three ways: from the roots of the
//! characteristic polynomial of the tail recurrence ([`steady_state_roots`]),
//! by solving the truncated balance equations ([`steady_state_truncated`]),
//! and in closed form for `A = 1` ([`steady_state_closed_form_a1`]).

mod roots;
pub mod ztransform;

use alloc::vec::Vec;

pub use roots::{polynomial_roots, steady_state_roots};

use crate::math;
use crate::models::{validate_pmf, TrafficModel};
use crate::{Error, Result};

/// Hard cap on the truncation level.
pub const MAX_TRUNCATION: usize = 1_000_000;

/// Arrival law and service probability of one decoupled user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    theta: Vec<f64>,
    p: f64,
}

impl ChainParams {
    pub fn new(theta: Vec<f64>, service_prob: f64) -> Result<Self> {
        validate_pmf(&theta, "theta")?;
        if theta.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: "needs at least two entries (A >= 1)",
            });
        }
        if !(service_prob > 0.0 && service_prob <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "service_prob",
                reason: "must lie in (0, 1]",
            });
        }
        Ok(Self {
            theta,
            p: service_prob,
        })
    }

    pub fn from_traffic(traffic: &TrafficModel, service_prob: f64) -> Result<Self> {
        Self::new(traffic.theta().to_vec(), service_prob)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn max_arrivals(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn service_prob(&self) -> f64 {
        self.p
    }

    pub fn p_bar(&self) -> f64 {
        1.0 - self.p
    }

    pub fn theta0_bar(&self) -> f64 {
        1.0 - self.theta[0]
    }

    pub fn mean_packets(&self) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(a, t)| a as f64 * t)
            .sum()
    }

    /// Coefficients of `c_A χ_{i+A} = Σ_{j<A} c_j χ_{i+j}`: returns
    /// `(c_A, [c_0, ..., c_{A-1}])` with `c_A = p + θ̄₀p̄`, `c_j = θ_{A-j}p̄`.
    pub fn recurrence(&self) -> (f64, Vec<f64>) {
        let a = self.max_arrivals();
        let pb = self.p_bar();
        let lead = self.p + self.theta0_bar() * pb;
        let c = (0..a).map(|j| self.theta[a - j] * pb).collect();
        (lead, c)
    }

    /// `max(200, ceil(50·A/p))`
    pub fn default_truncation(&self) -> usize {
        let k = math::ceil(50.0 * self.max_arrivals() as f64 / self.p) as usize;
        k.max(200)
    }
}

/// One-step transition probability `P(i, j)`.
pub fn transition_prob(i: usize, j: usize, params: &ChainParams) -> f64 {
    let theta = &params.theta;
    let p = params.p;
    let pb = params.p_bar();
    if i == 0 && j == 0 {
        return theta[0] + params.theta0_bar() * p;
    }
    if i == j {
        return theta[0] * pb;
    }
    if j == 0 {
        return p;
    }
    if j > i && j - i <= params.max_arrivals() {
        return theta[j - i] * pb;
    }
    0.0
}

/// `χ_0, ..., χ_{A-1}` where `χ_i = Σ_{j>=i} π_j`.
pub fn boundary_chi(params: &ChainParams) -> Vec<f64> {
    let a = params.max_arrivals();
    let theta = &params.theta;
    let pb = params.p_bar();
    let denom = params.p + params.theta0_bar() * pb;
    let mut chi = Vec::with_capacity(a);
    chi.push(1.0);
    for i in 1..a {
        let head: f64 = theta[i..=a].iter().sum::<f64>() * pb * chi[0];
        let mix: f64 = (1..i).map(|j| chi[j] * theta[i - j] * pb).sum();
        chi.push((head + mix) / denom);
    }
    chi
}

/// Stationary law on `0..=K` with a bound on the mass above `K`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationaryDistribution {
    probs: Vec<f64>,
    tail_bound: f64,
}

impl StationaryDistribution {
    pub fn new(probs: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || !(tail_bound >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "stationary distribution",
                reason: "probabilities must be nonnegative",
            });
        }
        Ok(Self { probs, tail_bound })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Truncation level `K`.
    pub fn truncation(&self) -> usize {
        self.probs.len() - 1
    }

    /// Bound on `Σ_{i>K} π_i`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs.get(i).copied().unwrap_or(0.0)
    }

    /// `χ_i = Σ_{j>=i} π_j` (including the tail bound).
    pub fn chi(&self, i: usize) -> f64 {
        self.probs.iter().skip(i).sum::<f64>() + self.tail_bound
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>()
    }

    /// `Σ i·π_i` over the stored states.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }
}

/// Closed form for Bernoulli arrivals (`A = 1`):
/// `π_0 = p/(pθ₀ + θ₁)`, `π_i = π_0(1 - π_0)^i`.
pub fn steady_state_closed_form_a1(theta1: f64, service_prob: f64) -> Result<StationaryDistribution> {
    if !(service_prob > 0.0) {
        return Err(Error::UnstableChain { truncation: 0 });
    }
    let params = ChainParams::new(alloc::vec![1.0 - theta1, theta1], service_prob)?;
    let theta0 = 1.0 - theta1;
    let pi0 = service_prob / (service_prob * theta0 + theta1);
    let ratio = 1.0 - pi0;
    let k = params.default_truncation();
    let mut probs = Vec::with_capacity(k + 1);
    let mut term = pi0;
    for _ in 0..=k {
        probs.push(term);
        term *= ratio;
    }
    // Σ_{i>K} π_0 r^i = r^{K+1}
    let tail = math::pow(ratio, (k + 1) as f64);
    StationaryDistribution::new(probs, tail)
}

/// Solves the balance equations on `0..=K`, with transitions beyond `K`
/// folded into state `K`.
///
/// Every state `j >= 1` is entered only from `j - A..=j` (besides
/// itself), so the folded system is lower Hessenberg and is solved by forward
/// substitution from `π_0 = 1` followed by normalization. `K` doubles until
/// the folded mass in state `K` drops below `tol`.
pub fn steady_state_truncated(
    params: &ChainParams,
    truncation: usize,
    tol: f64,
) -> Result<StationaryDistribution> {
    let a = params.max_arrivals();
    if truncation < 10 * a {
        return Err(Error::InvalidParameter {
            name: "truncation",
            reason: "must be at least 10·A",
        });
    }
    let mut k = truncation;
    loop {
        let probs = solve_folded(params, k);
        let folded = probs[k];
        if folded < tol {
            return StationaryDistribution::new(probs, folded);
        }
        if k >= MAX_TRUNCATION {
            return Err(Error::UnstableChain { truncation: k });
        }
        k = (2 * k).min(MAX_TRUNCATION);
    }
}

fn solve_folded(params: &ChainParams, k: usize) -> Vec<f64> {
    let a = params.max_arrivals();
    // P restricted to 0..=K, with the mass that would leave through the top
    // absorbed by state K.
    let folded = |i: usize, j: usize| -> f64 {
        if j < k {
            transition_prob(i, j, params)
        } else {
            // j == K: everything from i that lands at K or above
            (k..=i + a).map(|m| transition_prob(i, m, params)).sum()
        }
    };
    let mut pi = alloc::vec![0.0; k + 1];
    pi[0] = 1.0;
    for j in 1..=k {
        let inflow: f64 = (j.saturating_sub(a)..j).map(|i| pi[i] * folded(i, j)).sum();
        let stay = folded(j, j);
        pi[j] = inflow / (1.0 - stay);
    }
    let total: f64 = pi.iter().sum();
    for x in pi.iter_mut() {
        *x /= total;
    }
    pi
}

/// Little's-law delay of the chain in slots: mean packets in the buffer
/// over mean packet arrivals per slot.
pub fn chain_mean_delay(dist: &StationaryDistribution, traffic: &TrafficModel) -> Result<f64> {
    if !(dist.tail_bound() < 1e-6) {
        return Err(Error::Domain {
            what: "stationary tail bound",
            value: dist.tail_bound(),
        });
    }
    Ok(dist.mean() / traffic.mean_packets())
}

/// Largest violation of the cut equations
/// `p Σ_{j>=i+A} π_j = p̄ Σ_{j<A} Σ_{k=A-j}^{A} π_{i+j} θ_k` over
/// `0 <= i <= K - A`.
pub fn balance_residual(dist: &StationaryDistribution, params: &ChainParams) -> f64 {
    let a = params.max_arrivals();
    let k = dist.truncation();
    let pi = dist.probs();
    let p = params.service_prob();
    let pb = params.p_bar();
    // upper tails Θ_m = Σ_{k>=m} θ_k
    let mut upper = alloc::vec![0.0; a + 2];
    for m in (0..=a).rev() {
        upper[m] = upper[m + 1] + params.theta()[m];
    }
    let mut chi = alloc::vec![0.0; k + 2];
    chi[k + 1] = dist.tail_bound();
    for i in (0..=k).rev() {
        chi[i] = chi[i + 1] + pi[i];
    }
    let mut worst: f64 = 0.0;
    for i in 0..=k.saturating_sub(a) {
        let lhs = chi[i + a] * p;
        let rhs: f64 = (0..a).map(|j| pi[i + j] * upper[a - j] * pb).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Largest violation of `c_A χ_{i+A} - Σ_{j<A} c_j χ_{i+j} = 0` over the
/// `χ` values available in `chi`.
pub fn recurrence_residual(chi: &[f64], params: &ChainParams) -> f64 {
    let a = params.max_arrivals();
    let (lead, c) = params.recurrence();
    let mut worst: f64 = 0.0;
    for i in 0..chi.len().saturating_sub(a) {
        let r = lead * chi[i + a] - (0..a).map(|j| c[j] * chi[i + j]).sum::<f64>();
        worst = worst.max(r.abs());
    }
    worst
}

/// Largest violation of `π = πP` on the stored states, with `P` folded at `K`.
pub fn global_balance_residual(dist: &StationaryDistribution, params: &ChainParams) -> f64 {
    let a = params.max_arrivals();
    let k = dist.truncation();
    let pi = dist.probs();
    let mut worst: f64 = 0.0;
    for j in 0..=k {
        let inflow: f64 = if j == 0 {
            (0..=k).map(|i| pi[i] * transition_prob(i, 0, params)).sum()
        } else if j < k {
            (j.saturating_sub(a)..=j).map(|i| pi[i] * transition_prob(i, j, params)).sum()
        } else {
            (k.saturating_sub(a)..=k)
                .map(|i| pi[i] * (k..=i + a).map(|m| transition_prob(i, m, params)).sum::<f64>())
                .sum()
        };
        worst = worst.max((inflow - pi[j]).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(theta: &[f64], p: f64) -> ChainParams {
        ChainParams::new(theta.to_vec(), p).unwrap()
    }

    #[test]
    fn transition_examples() {
        let c = params(&[0.4, 0.6], 0.5);
        assert!((transition_prob(0, 0, &c) - 0.7).abs() < 1e-15);
        assert_eq!(transition_prob(3, 0, &c), 0.5);
        assert!((transition_prob(2, 3, &c) - 0.3).abs() < 1e-15);
        assert_eq!(transition_prob(3, 2, &c), 0.0);
        assert_eq!(transition_prob(2, 4, &c), 0.0);
    }

    #[test]
    fn rows_sum_to_one() {
        let c = params(&[0.1, 0.2, 0.3, 0.4], 0.37);
        for i in 0..20 {
            let s: f64 = (0..30).map(|j| transition_prob(i, j, &c)).sum();
            assert!((s - 1.0).abs() < 1e-15, "row {i}: {s}");
        }
    }

    #[test]
    fn recurrence_coefficients() {
        let c = params(&[0.2, 0.3, 0.5], 0.4);
        let (lead, cs) = c.recurrence();
        assert!((lead - (0.4 + 0.8 * 0.6)).abs() < 1e-15);
        assert!((cs[0] - 0.5 * 0.6).abs() < 1e-15);
        assert!((cs[1] - 0.3 * 0.6).abs() < 1e-15);
        // c_A - Σ c_j = p
        assert!((lead - cs.iter().sum::<f64>() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(boundary_chi(&params(&[0.3, 0.7], 0.5)), vec![1.0]);
        let chi = boundary_chi(&params(&[0.25, 0.5, 0.25], 0.5));
        assert!((chi[1] - 0.375 / 0.875).abs() < 1e-15);
        let chi = boundary_chi(&params(&[0.25, 0.5, 0.25], 1.0));
        // p = 1 leaves nothing in the buffer at slot end
        assert_eq!(chi[1], 0.0);
    }

    #[test]
    fn closed_form_examples() {
        let d = steady_state_closed_form_a1(0.5, 0.5).unwrap();
        assert!((d.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.get(1) - 2.0 / 9.0).abs() < 1e-15);
        let d = steady_state_closed_form_a1(0.3, 1.0).unwrap();
        assert_eq!(d.get(0), 1.0);
        let d = steady_state_closed_form_a1(0.6, 0.3).unwrap();
        assert!((d.mean() - 1.4).abs() < 1e-10);
        assert!(steady_state_closed_form_a1(0.6, 0.0).is_err());
    }

    #[test]
    fn truncated_matches_closed_form() {
        let t = steady_state_truncated(&params(&[0.5, 0.5], 0.5), 200, 1e-10).unwrap();
        let c = steady_state_closed_form_a1(0.5, 0.5).unwrap();
        for i in 0..t.truncation() {
            assert!((t.get(i) - c.get(i)).abs() < 1e-10);
        }
    }

    #[test]
    fn truncated_trivial_cases() {
        let t = steady_state_truncated(&params(&[0.2, 0.5, 0.3], 1.0), 200, 1e-10).unwrap();
        assert_eq!(t.get(0), 1.0);
        assert!(t.probs()[1..].iter().all(|&x| x == 0.0));
        let t = steady_state_truncated(&params(&[1.0, 0.0], 0.3), 200, 1e-10).unwrap();
        assert_eq!(t.get(0), 1.0);
        assert!(t.probs()[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn truncated_grows_k_when_needed() {
        let c = params(&[0.0, 0.0, 0.0, 1.0], 0.02);
        let t = steady_state_truncated(&c, 30, 1e-10).unwrap();
        assert!(t.truncation() > 30);
        assert!(t.tail_bound() < 1e-10);
        assert!(steady_state_truncated(&c, 5, 1e-10).is_err());
    }

    #[test]
    fn truncated_satisfies_balance() {
        let c = params(&[0.3, 0.1, 0.4, 0.2], 0.35);
        let t = steady_state_truncated(&c, c.default_truncation(), 1e-12).unwrap();
        assert!(global_balance_residual(&t, &c) < 1e-12);
        assert!(balance_residual(&t, &c) < 1e-12);
        assert!((t.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_delay_examples() {
        let traffic = TrafficModel::bernoulli(0.5, 1.0).unwrap();
        let d = steady_state_closed_form_a1(0.5, 1.0).unwrap();
        assert_eq!(chain_mean_delay(&d, &traffic).unwrap(), 0.0);
        let d = steady_state_closed_form_a1(0.5, 0.5).unwrap();
        assert!((chain_mean_delay(&d, &traffic).unwrap() - 1.0).abs() < 1e-10);

        let traffic = TrafficModel::new(vec![0.25, 0.5, 0.25], 1.0).unwrap();
        let c = ChainParams::from_traffic(&traffic, 0.4).unwrap();
        let t = steady_state_truncated(&c, c.default_truncation(), 1e-12).unwrap();
        assert!((chain_mean_delay(&t, &traffic).unwrap() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn chain_delay_requires_small_tail() {
        let traffic = TrafficModel::bernoulli(0.5, 1.0).unwrap();
        let d = StationaryDistribution::new(vec![0.5, 0.4], 0.1).unwrap();
        assert!(chain_mean_delay(&d, &traffic).is_err());
    }
}
