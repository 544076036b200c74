//! Exact tabular Q-learning, the reference the deep learner approximates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self { states, actions, values: vec![0.0; states * actions] }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `Q(s,α) ← Q(s,α) + β[U + γ·max_α′ Q(s′,α′) − Q(s,α)]`.
pub fn tabular_q_update(table: &mut QTable, s: usize, a: usize, u: f64, s_next: usize, beta: f64, gamma: f64) -> Result<()> {
    if s >= table.states || s_next >= table.states || a >= table.actions {
        return Err(Error::Contract(format!("state/action ({s}, {a}, {s_next}) outside table")));
    }
    let q = table.get(s, a);
    let target = u + gamma * table.max(s_next);
    table.set(s, a, q + beta * (target - q));
    Ok(())
}

/// Optimal Q for a deterministic MDP given by `step(s, a) = (s′, U)`.
pub fn value_iteration(states: usize, actions: usize, gamma: f64, tol: f64, step: impl Fn(usize, usize) -> (usize, f64)) -> QTable {
    let mut q = QTable::zeros(states, actions);
    loop {
        let mut next = q.clone();
        for s in 0..states {
            for a in 0..actions {
                let (s2, u) = step(s, a);
                next.set(s, a, u + gamma * q.max(s2));
            }
        }
        let diff = next.max_abs_diff(&q);
        q = next;
        if diff < tol {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(s: usize, a: usize) -> (usize, f64) {
        match (s, a) {
            (0, 0) => (0, 0.0),
            (0, _) => (1, 1.0),
            (1, 0) => (0, 2.0),
            _ => (1, 0.5),
        }
    }

    #[test]
    fn unit_rate_without_discount_copies_utility() {
        let mut t = QTable::zeros(2, 2);
        t.set(1, 1, 7.0);
        tabular_q_update(&mut t, 0, 1, 3.0, 1, 1.0, 0.0).unwrap();
        assert_eq!(t.get(0, 1), 3.0);
    }

    #[test]
    fn zero_rate_changes_nothing() {
        let mut t = QTable::zeros(2, 2);
        t.set(0, 0, 1.5);
        let before = t.clone();
        tabular_q_update(&mut t, 0, 0, 10.0, 1, 0.0, 0.9).unwrap();
        assert_eq!(t, before);
        assert!(tabular_q_update(&mut t, 2, 0, 0.0, 0, 0.5, 0.5).is_err());
    }

    #[test]
    fn sweeps_reach_value_iteration_fixed_point() {
        let gamma = 0.9;
        let star = value_iteration(2, 2, gamma, 1e-14, chain);
        // Bellman check on the oracle itself.
        for s in 0..2 {
            for a in 0..2 {
                let (s2, u) = chain(s, a);
                assert!((star.get(s, a) - (u + gamma * star.max(s2))).abs() < 1e-12);
            }
        }
        let mut q = QTable::zeros(2, 2);
        for k in 0..10_000 {
            let (s, a) = (k % 2, (k / 2) % 2);
            let (s2, u) = chain(s, a);
            tabular_q_update(&mut q, s, a, u, s2, 0.5, gamma).unwrap();
        }
        assert!(q.max_abs_diff(&star) <= 1e-6, "{q:?} vs {star:?}");
    }
}
