//! Generating function of the tail sums.
//!
//! With `Y(z) = Σ χ_i z^i`, the tail recurrence gives `Y = N/D` where
//!
//! ```text
//! N(z) = Σ_{l<A} χ_l (Σ_{k=l+1}^{A-1} c_k z^{A-k+l} - c_A z^l)
//! D(z) = Σ_{j<A} c_j z^{A-j} - c_A
//! ```
//!
//! and the state probabilities follow from `Π(z) = ((z - 1)Y(z) + 1)/z`.
//! Expanding `N/D` in ascending powers gives an independent route to `π`.

use alloc::vec;
use alloc::vec::Vec;

use super::{boundary_chi, ChainParams};

/// Ascending coefficients of `(N, D)`.
pub fn rational_form(params: &ChainParams) -> (Vec<f64>, Vec<f64>) {
    let a = params.max_arrivals();
    let (lead, c) = params.recurrence();
    let chi = boundary_chi(params);
    let mut num = vec![0.0; 2 * a];
    for (l, &x) in chi.iter().enumerate() {
        for k in l + 1..a {
            num[a - k + l] += x * c[k];
        }
        num[l] -= x * lead;
    }
    let mut den = vec![0.0; a + 1];
    den[0] = -lead;
    for (j, &cj) in c.iter().enumerate() {
        den[a - j] += cj;
    }
    (num, den)
}

/// First `n` coefficients of `N(z)/D(z)` by long division.
pub fn series(num: &[f64], den: &[f64], n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    for m in 0..n {
        let mut acc = num.get(m).copied().unwrap_or(0.0);
        for k in 1..den.len().min(m + 1) {
            acc -= den[k] * out[m - k];
        }
        out.push(acc / den[0]);
    }
    out
}

/// `χ_0, ..., χ_{n-1}` from the generating function.
pub fn chi_series(params: &ChainParams, n: usize) -> Vec<f64> {
    let (num, den) = rational_form(params);
    series(&num, &den, n)
}

/// `π_0, ..., π_{n-1}` from `((z - 1)Y + 1)/z`.
pub fn pi_series(params: &ChainParams, n: usize) -> Vec<f64> {
    let chi = chi_series(params, n + 1);
    chi.windows(2).map(|w| w[0] - w[1]).collect()
}
