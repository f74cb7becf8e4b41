use std::collections::VecDeque;

use rand::Rng;

/// A generated clip with the metric score it received when stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayEntry {
    pub audio: Vec<f32>,
    pub score: f64,
    pub epoch: usize,
}

/// Bounded FIFO of historical generator outputs. Scores are frozen at push
/// time and never recomputed.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<ReplayEntry>,
}

pub const REPLAY_CAPACITY: usize = 2000;
/// Fraction of generated batches copied into the buffer.
pub const REPLAY_PUSH_RATE: f64 = 0.1;

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(4096)),
        }
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, entry: ReplayEntry) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    /// `n` entries drawn uniformly with replacement; empty when the buffer is.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<&ReplayEntry> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.entries[rng.random_range(0..self.entries.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayEntry> {
        self.entries.iter()
    }
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        Self::new(REPLAY_CAPACITY)
    }
}
