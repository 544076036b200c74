//! One-step stage game between fusion weights and injections.

use crate::adversary::AttackVector;
use crate::error::{Error, Result};
use crate::fusion::{NoiseModel, WeightVector};
use serde::{Deserialize, Serialize};

/// Zero-sum payoff to the column player (attacker); the row player minimizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::Contract(format!("payoff matrix {rows}x{cols} needs {} entries, got {}", rows * cols, entries.len())));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("payoff matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged payoff rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `(A y)_i`: the row player's expected payoff per pure row.
    pub fn row_payoffs(&self, y: &MixedStrategy) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(y.probs()).map(|(a, p)| a * p).sum()).collect()
    }

    /// `(xᵀA)_j`: the column player's expected payoff per pure column.
    pub fn col_payoffs(&self, x: &MixedStrategy) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, p) in x.probs().iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += p * a;
            }
        }
        out
    }

    pub fn value(&self, x: &MixedStrategy, y: &MixedStrategy) -> f64 {
        self.row_payoffs(y).iter().zip(x.probs()).map(|(r, p)| r * p).sum()
    }

    /// Combined gain available to the two players from pure deviations.
    pub fn exploitability(&self, x: &MixedStrategy, y: &MixedStrategy) -> f64 {
        let best_col = self.col_payoffs(x).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let best_row = self.row_payoffs(y).into_iter().fold(f64::INFINITY, f64::min);
        best_col - best_row
    }

    pub fn transposed_negated(&self) -> Self {
        let mut entries = vec![0.0; self.entries.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                entries[j * self.rows + i] = -self.get(i, j);
            }
        }
        Self { rows: self.cols, cols: self.rows, entries }
    }
}

/// Probability vector over an action grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub const SUM_TOL: f64 = 1e-9;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Contract(format!("invalid mixed strategy {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::Contract(format!("mixed strategy sums to {sum}")));
        }
        Ok(Self(p))
    }

    pub fn pure(n: usize, i: usize) -> Self {
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Normalized counts.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Contract("counts must have positive total".into()));
        }
        Self::new(counts.iter().map(|c| c / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `E[(wᵀe + wᵀa)²] = (wᵀa)² + Σ_k w_k²σ_k²` for every (w, a) pair.
pub fn expected_payoff_matrix(av: &[WeightVector], att: &[AttackVector], noise: &NoiseModel) -> Result<PayoffMatrix> {
    if av.is_empty() || att.is_empty() {
        return Err(Error::Contract("payoff grids must be nonempty".into()));
    }
    let mut entries = Vec::with_capacity(av.len() * att.len());
    for w in av {
        let var = noise.fused_variance(w);
        for a in att {
            let bias = w.dot(a.as_array());
            entries.push(bias * bias + var);
        }
    }
    PayoffMatrix::new(av.len(), att.len(), entries)
}
