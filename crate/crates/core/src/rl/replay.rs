//! Bounded FIFO experience memory with uniform sampling.

use rand::Rng;
use std::collections::VecDeque;
use std::sync::Arc;

/// One transition as seen by a single player.
///
/// States are shared between consecutive experiences, so they are
/// reference counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Arc<[f64]>,
    pub action: usize,
    pub utility: f64,
    pub next_state: Arc<[f64]>,
    /// Taken at the first step of an episode.
    pub initial: bool,
    /// Set when the next state is terminal and bootstrapping is cut there.
    pub cutoff: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    entries: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, entries: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores `exp`, evicting the oldest entry when full.
    pub fn push(&mut self, exp: Experience) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(exp);
    }

    pub fn get(&self, index: usize) -> Option<&Experience> {
        self.entries.get(index)
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.entries.is_empty() {
            None
        } else {
            Some(rng.random_range(0..self.entries.len()))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Experience> {
        self.sample_index(rng).map(|i| &self.entries[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn exp(tag: f64) -> Experience {
        let s: Arc<[f64]> = Arc::from(vec![tag]);
        Experience { state: s.clone(), action: 0, utility: tag, next_state: s, initial: false, cutoff: false }
    }

    #[test]
    fn fifo_eviction() {
        let mut m = ReplayMemory::new(3);
        assert!(m.sample(&mut crate::rng::stream(1, crate::rng::Stream::AvLearner)).is_none());
        for i in 0..5 {
            m.push(exp(i as f64));
        }
        assert_eq!(m.len(), 3);
        let tags: Vec<f64> = m.iter().map(|e| e.utility).collect();
        assert_eq!(tags, vec![2.0, 3.0, 4.0]);
    }
}
