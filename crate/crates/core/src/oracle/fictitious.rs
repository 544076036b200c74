//! Fictitious play for finite zero-sum games.

use super::payoff::{MixedStrategy, PayoffMatrix};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpRecord {
    pub iteration: usize,
    pub value: f64,
    pub exploitability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FictitiousPlayResult {
    pub av: MixedStrategy,
    pub att: MixedStrategy,
    /// Midpoint of the two best-response payoffs against the empirical mixes.
    pub value: f64,
    pub exploitability: f64,
    /// Sampled at most about a thousand times over the run.
    pub history: Vec<FpRecord>,
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Simultaneous fictitious play from the pure profile (0, 0).
///
/// Each iteration both players best-respond to the opponent's empirical
/// frequencies so far; ties go to the lowest index.
pub fn fictitious_play(payoff: &PayoffMatrix, iterations: usize) -> Result<FictitiousPlayResult> {
    if iterations == 0 {
        return Err(Error::config("fp_iterations", "must be at least 1"));
    }
    let (m, n) = (payoff.rows(), payoff.cols());
    let mut row_counts = vec![0.0; m];
    let mut col_counts = vec![0.0; n];
    // Running sums of A·e_j over column plays and e_iᵀ·A over row plays.
    let mut row_sum = vec![0.0; m];
    let mut col_sum = vec![0.0; n];
    let stride = iterations.div_ceil(1000);
    let mut history = Vec::new();
    let (mut i, mut j) = (0, 0);
    for t in 1..=iterations {
        row_counts[i] += 1.0;
        col_counts[j] += 1.0;
        for r in 0..m {
            row_sum[r] += payoff.get(r, j);
        }
        for (c, a) in col_sum.iter_mut().zip(payoff.row(i)) {
            *c += a;
        }
        let lower = row_sum.iter().copied().fold(f64::INFINITY, f64::min) / t as f64;
        let upper = col_sum.iter().copied().fold(f64::NEG_INFINITY, f64::max) / t as f64;
        if t % stride == 0 || t == iterations {
            history.push(FpRecord { iteration: t, value: 0.5 * (lower + upper), exploitability: upper - lower });
        }
        i = argmin(&row_sum);
        j = argmax(&col_sum);
    }
    let av = MixedStrategy::from_counts(&row_counts)?;
    let att = MixedStrategy::from_counts(&col_counts)?;
    let last = *history.last().expect("at least one record");
    Ok(FictitiousPlayResult { av, att, value: last.value, exploitability: last.exploitability, history })
}
