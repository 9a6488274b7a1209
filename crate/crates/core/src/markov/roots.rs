//! Characteristic-root solution of the tail recurrence.
//!
//! `χ_i = Σ_{j>=i} π_j` obeys `c_A χ_{i+A} = Σ_{j<A} c_j χ_{i+j}` for all
//! `i >= 0`. Since `c_A - Σ c_j = p > 0`, every root of
//! `c_A r^A - Σ c_j r^j` lies strictly inside the unit circle, so `χ` is a
//! combination of the `A` modes `i^m r^i`, fixed by the `A` boundary values.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{boundary_chi, ChainParams, StationaryDistribution};
use crate::math;
use crate::{Error, Result};

/// Roots whose modulus reaches this are not summable.
const UNIT_CIRCLE_MARGIN: f64 = 1e-12;
/// Roots closer than this (relative) are treated as one repeated root.
const CLUSTER_TOL: f64 = 1e-7;

/// Roots of `coeffs[0] + coeffs[1]·x + ... + coeffs[n]·x^n`, as the
/// eigenvalues of the companion matrix. Exact zero roots (vanishing
/// low-order coefficients) are split off first.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1] == 0.0 {
        hi -= 1;
    }
    if hi == 0 {
        return Err(Error::InvalidParameter {
            name: "polynomial",
            reason: "is identically zero",
        });
    }
    let coeffs = &coeffs[..hi];
    let zeros = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let reduced = &coeffs[zeros..];
    let degree = reduced.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    if degree == 0 {
        return Ok(roots);
    }
    let lead = reduced[degree];
    // 1-based upper Hessenberg companion matrix
    let n = degree;
    let mut m = vec![vec![0.0; n + 1]; n + 1];
    for i in 2..=n {
        m[i][i - 1] = 1.0;
    }
    for i in 1..=n {
        // first row holds -a_{n-i}/a_n
        m[1][i] = -reduced[n - i] / lead;
    }
    let eig = hessenberg_eigenvalues(m, n)?;
    for r in eig {
        roots.push(polish(reduced, r));
    }
    Ok(roots)
}

fn horner(coeffs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

fn polish(coeffs: &[f64], mut x: Complex64) -> Complex64 {
    for _ in 0..3 {
        let (p, dp) = horner(coeffs, x);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let next = x - step;
        if horner(coeffs, next).0.norm() >= p.norm() {
            break;
        }
        x = next;
    }
    x
}

/// Eigenvalues of a real upper Hessenberg matrix (1-based, `n × n`) by the
/// Francis double-shift QR iteration.
fn hessenberg_eigenvalues(mut a: Vec<Vec<f64>>, n: usize) -> Result<Vec<Complex64>> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w): (f64, f64, f64, f64);
    while nn >= 1 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                // one root found
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                // two roots found
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt_nostd();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign_nostd(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if its == 60 {
                return Err(Error::NoConvergence {
                    what: "companion eigenvalues",
                    iterations: its,
                    lo: 0.0,
                    hi: 0.0,
                });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // form the shift and look for two consecutive small subdiagonals
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s0;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            // double QR step on rows l..nn and columns m..nn
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt_nostd().copysign_nostd(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

trait NoStdFloat {
    fn sqrt_nostd(self) -> Self;
    fn copysign_nostd(self, sign: Self) -> Self;
}

impl NoStdFloat for f64 {
    fn sqrt_nostd(self) -> f64 {
        math::sqrt(self)
    }
    fn copysign_nostd(self, sign: f64) -> f64 {
        math::copysign(self, sign)
    }
}

/// A mode `i^power · root^i` (or, for a zero root, the unit impulse at
/// `i = power`).
#[derive(Debug, Clone, Copy)]
struct Mode {
    root: Complex64,
    power: u32,
    zero: bool,
}

impl Mode {
    fn at(&self, i: usize) -> Complex64 {
        if self.zero {
            return if i == self.power as usize {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        self.root.powu(i as u32) * math::pow(i as f64, self.power as f64)
    }
}

fn modes(roots: &[Complex64]) -> Vec<Mode> {
    let mut clusters: Vec<(Complex64, u32, bool)> = Vec::new();
    for &r in roots {
        let zero = r.norm() == 0.0;
        let hit = clusters.iter_mut().find(|(c, _, z)| {
            if zero || *z {
                return zero && *z;
            }
            (*c - r).norm() <= CLUSTER_TOL * c.norm().max(r.norm())
        });
        match hit {
            Some((c, count, _)) => {
                // running mean of the cluster
                *c = (*c * (*count as f64) + r) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((r, 1, zero)),
        }
    }
    clusters
        .into_iter()
        .flat_map(|(root, count, zero)| (0..count).map(move |power| Mode { root, power, zero }))
        .collect()
}

fn solve_complex(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .expect("nonempty");
        if a[piv][col].norm() == 0.0 {
            return Err(Error::InvalidParameter {
                name: "boundary system",
                reason: "is singular",
            });
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Stationary law from the characteristic roots of the tail recurrence,
/// reported on `0..=K` with the exact remaining mass `χ_{K+1}` as tail.
pub fn steady_state_roots(params: &ChainParams, truncation: usize) -> Result<StationaryDistribution> {
    let a = params.max_arrivals();
    let (lead, c) = params.recurrence();
    // c_A r^A - Σ c_j r^j, ascending powers
    let mut poly: Vec<f64> = c.iter().map(|x| -x).collect();
    poly.push(lead);
    let roots = polynomial_roots(&poly)?;
    let inside = roots
        .iter()
        .filter(|r| r.norm() < 1.0 - UNIT_CIRCLE_MARGIN)
        .count();
    if inside != a {
        return Err(Error::RootCount {
            expected: a,
            found: inside,
        });
    }
    let modes = modes(&roots);
    let boundary = boundary_chi(params);
    let system: Vec<Vec<Complex64>> = (0..a)
        .map(|i| modes.iter().map(|m| m.at(i)).collect())
        .collect();
    let rhs = boundary.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let weights = solve_complex(system, rhs)?;

    // χ_0..=χ_{K+1}, advancing each mode's power incrementally
    let k = truncation;
    let mut chi = Vec::with_capacity(k + 2);
    let mut power: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); modes.len()];
    for i in 0..=k + 1 {
        let mut s = Complex64::new(0.0, 0.0);
        for (idx, m) in modes.iter().enumerate() {
            let v = if m.zero {
                m.at(i)
            } else if m.power == 0 {
                power[idx]
            } else {
                power[idx] * math::pow(i as f64, m.power as f64)
            };
            s += weights[idx] * v;
        }
        chi.push(s.re);
        for (idx, m) in modes.iter().enumerate() {
            if !m.zero {
                power[idx] *= m.root;
            }
        }
    }
    let probs: Vec<f64> = chi.windows(2).map(|w| (w[0] - w[1]).max(0.0)).take(k + 1).collect();
    StationaryDistribution::new(probs, chi[k + 1].abs())
}
