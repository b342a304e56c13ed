use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const DEFAULT_CAPACITY: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO store of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Experience>,
    /// Slot the next push overwrites once full.
    head: usize,
    /// Total pushes ever made.
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            pushed: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, e: Experience) -> Result<()> {
        if e.s.len() != e.s_next.len() {
            return Err(Error::Dimension {
                expected: e.s.len(),
                got: e.s_next.len(),
            });
        }
        if !e.r.is_finite() {
            return Err(Error::NonFinite("reward".into()));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(e);
        } else {
            self.storage[self.head] = e;
            self.head = (self.head + 1) % self.capacity;
        }
        self.pushed += 1;
        Ok(())
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        let (newer, older) = self.storage.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    /// `batch` distinct experiences drawn uniformly.
    pub fn sample(&self, batch: usize, rng: &mut SimRng) -> Result<Vec<&Experience>> {
        if batch > self.len() || batch == 0 {
            return Err(Error::BufferUnderfull {
                have: self.len(),
                need: batch.max(1),
            });
        }
        Ok(index::sample(rng, self.len(), batch)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }

    pub fn clear(&mut self) {
        self.storage.clear();
        self.head = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn exp(i: usize) -> Experience {
        Experience { s: vec![i as f64], a: 0, r: i as f64, s_next: vec![0.0], done: false }
    }

    proptest! {
        #[test]
        fn fifo_eviction(cap in 1usize..50, pushes in 0usize..200) {
            let mut b = ReplayBuffer::new(cap);
            for i in 0..pushes {
                b.push(exp(i)).unwrap();
            }
            prop_assert_eq!(b.len(), pushes.min(cap));
            let kept: Vec<f64> = b.iter().map(|e| e.r).collect();
            let first = pushes.saturating_sub(cap);
            let expected: Vec<f64> = (first..pushes).map(|i| i as f64).collect();
            prop_assert_eq!(kept, expected);
        }
    }

    #[test]
    fn sampling_is_uniform_without_replacement() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(exp(i)).unwrap();
        }
        let mut r = rng::seeded(5);
        let mut counts = [0u32; 100];
        for _ in 0..10_000 {
            let batch = b.sample(1, &mut r).unwrap();
            counts[batch[0].r as usize] += 1;
        }
        // binomial(10000, 0.01): sd = sqrt(99)
        let sd = (10_000.0 * 0.01 * 0.99f64).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - 100.0).abs() <= 3.0 * sd + 1.0));
        let batch = b.sample(64, &mut r).unwrap();
        let mut seen: Vec<u64> = batch.iter().map(|e| e.r as u64).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 64);
    }

    #[test]
    fn underfull_and_mismatched_pushes_are_rejected() {
        let mut b = ReplayBuffer::new(10);
        b.push(exp(0)).unwrap();
        assert!(matches!(b.sample(2, &mut rng::seeded(1)), Err(Error::BufferUnderfull { have: 1, need: 2 })));
        let bad = Experience { s: vec![1.0], a: 0, r: 0.0, s_next: vec![], done: true };
        assert!(b.push(bad).is_err());
    }
}
