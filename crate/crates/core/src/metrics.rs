//! Statistics that tie simulation to theory.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::markov::StationaryDistribution;
use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-6;

/// Little's law: `mean_queue_bits / λ` slots.
pub fn little_delay(mean_queue_bits: f64, arrival_bits: f64) -> Result<f64> {
    if !(arrival_bits > 0.0) || !arrival_bits.is_finite() {
        return Err(Error::Domain {
            what: "arrival rate",
            value: arrival_bits,
        });
    }
    Ok(mean_queue_bits / arrival_bits)
}

pub fn relative_error(estimate: f64, reference: f64) -> f64 {
    ((estimate - reference) / reference).abs()
}

/// Counts scaled to sum to one; all zeros for an empty histogram.
pub fn histogram_pmf(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return alloc::vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

fn check_normalized(p: &[f64]) -> Result<()> {
    let s: f64 = p.iter().sum();
    if p.iter().any(|x| !(*x >= 0.0)) || (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Unnormalized { sum: s });
    }
    Ok(())
}

/// `½·Σ|a_i - b_i|` over the union support (missing entries are zero).
pub fn tv_distance_pmf(a: &[f64], b: &[f64]) -> Result<f64> {
    check_normalized(a)?;
    check_normalized(b)?;
    let n = a.len().max(b.len());
    let get = |p: &[f64], i: usize| p.get(i).copied().unwrap_or(0.0);
    let s: f64 = (0..n).map(|i| (get(a, i) - get(b, i)).abs()).sum();
    Ok((0.5 * s).min(1.0))
}

/// Theoretical law on the union support with its tail mass folded into the
/// last bin.
fn folded(theory: &StationaryDistribution, len: usize) -> Vec<f64> {
    let n = len.max(theory.probs().len());
    let mut out: Vec<f64> = (0..n).map(|i| theory.get(i)).collect();
    out[n - 1] += theory.tail_bound();
    out
}

/// Total variation between an empirical pmf and a stationary law.
pub fn tv_distance(empirical: &[f64], theory: &StationaryDistribution) -> Result<f64> {
    tv_distance_pmf(empirical, &folded(theory, empirical.len()))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistributionComparison {
    pub tv_distance: f64,
    /// `sup_k |F̂(k) - F(k)|`.
    pub ks_like_sup: f64,
    /// Number of states compared.
    pub support: usize,
    pub folded_tail_mass: f64,
    pub note: String,
}

pub fn compare_distributions(
    empirical: &[f64],
    theory: &StationaryDistribution,
) -> Result<DistributionComparison> {
    let th = folded(theory, empirical.len());
    let tv = tv_distance_pmf(empirical, &th)?;
    let mut fe = 0.0;
    let mut ft = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..th.len() {
        fe += empirical.get(i).copied().unwrap_or(0.0);
        ft += th[i];
        sup = sup.max((fe - ft).abs());
    }
    let note = alloc::format!(
        "states 0..={}; theoretical mass {:e} beyond state {} folded into the last bin",
        th.len() - 1,
        theory.tail_bound(),
        theory.truncation()
    );
    Ok(DistributionComparison {
        tv_distance: tv,
        ks_like_sup: sup,
        support: th.len(),
        folded_tail_mass: theory.tail_bound(),
        note,
    })
}

/// Mean and standard error over independent replications.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicationStats {
    pub count: usize,
    pub mean: f64,
    /// Zero for a single replication.
    pub std_error: f64,
}

pub fn replication_stats(values: &[f64]) -> Result<ReplicationStats> {
    if values.is_empty() {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: "must not be empty",
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        math::sqrt(var / n)
    } else {
        0.0
    };
    Ok(ReplicationStats {
        count: values.len(),
        mean,
        std_error,
    })
}
