//! Exact equilibria of small zero-sum games by support enumeration.

use super::payoff::{MixedStrategy, PayoffMatrix};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MAX_EXACT_DIM: usize = 4;
/// Largest gain a pure deviation may offer at an accepted equilibrium.
pub const BEST_RESPONSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub av: MixedStrategy,
    pub att: MixedStrategy,
    pub value: f64,
}

/// Solves `M z = rhs` in place by Gaussian elimination with partial
/// pivoting; `None` when a pivot is numerically zero.
fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * z[c]).sum();
        z[r] = (rhs[r] - s) / m[r][r];
    }
    Some(z)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Mix on `support` making every pure strategy in `other` indifferent.
///
/// `payoff(s, o)` is the payoff when the solving player plays `s` against `o`.
fn indifferent_mix(support: &[usize], other: &[usize], payoff: impl Fn(usize, usize) -> f64, size: usize) -> Option<(Vec<f64>, f64)> {
    let k = support.len();
    // Unknowns: the k probabilities, then the value.
    let mut m = Vec::with_capacity(k + 1);
    let mut rhs = Vec::with_capacity(k + 1);
    for &o in other {
        let mut row: Vec<f64> = support.iter().map(|&s| payoff(s, o)).collect();
        row.push(-1.0);
        m.push(row);
        rhs.push(0.0);
    }
    let mut sum_row = vec![1.0; k];
    sum_row.push(0.0);
    m.push(sum_row);
    rhs.push(1.0);
    let z = solve(m, rhs)?;
    let mut p = vec![0.0; size];
    for (idx, &s) in support.iter().enumerate() {
        if z[idx] < -1e-12 {
            return None;
        }
        p[s] = z[idx].max(0.0);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Some((p, z[k]))
}

/// Equilibrium of a zero-sum game with both dimensions at most 4.
///
/// Supports of equal size are enumerated in increasing size; each
/// candidate is accepted only if no pure deviation gains more than
/// [`BEST_RESPONSE_TOL`].
pub fn exact_msne_small(payoff: &PayoffMatrix) -> Result<Equilibrium> {
    let (m, n) = (payoff.rows(), payoff.cols());
    if m > MAX_EXACT_DIM || n > MAX_EXACT_DIM {
        return Err(Error::config("exact", format!("exact solve supports at most {MAX_EXACT_DIM}x{MAX_EXACT_DIM}, got {m}x{n}")));
    }
    for k in 1..=m.min(n) {
        for rows in subsets(m, k) {
            for cols in subsets(n, k) {
                let Some((x, _)) = indifferent_mix(&rows, &cols, |i, j| payoff.get(i, j), m) else { continue };
                let Some((y, _)) = indifferent_mix(&cols, &rows, |j, i| payoff.get(i, j), n) else { continue };
                let (Ok(x), Ok(y)) = (MixedStrategy::new(x), MixedStrategy::new(y)) else { continue };
                let value = payoff.value(&x, &y);
                let row_gain = value - payoff.row_payoffs(&y).into_iter().fold(f64::INFINITY, f64::min);
                let col_gain = payoff.col_payoffs(&x).into_iter().fold(f64::NEG_INFINITY, f64::max) - value;
                if row_gain <= BEST_RESPONSE_TOL && col_gain <= BEST_RESPONSE_TOL {
                    return Ok(Equilibrium { av: x, att: y, value });
                }
            }
        }
    }
    Err(Error::Numerical("no equal-size support passed the best-response check (degenerate game)".into()))
}
