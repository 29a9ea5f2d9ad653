//! Experience replay: bounded FIFO stores of transitions (dense variant) or
//! whole episodes (recurrent variants).

use std::collections::VecDeque;

use crate::rng::Rng;

/// One replay unit: an observed step. `terminal` is true only when the agent
/// reached the target; an episode cut off at the step limit is truncated, not
/// terminal, and still bootstraps from its successor state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Ordered transitions of one episode, the replay unit for recurrent
/// variants (training windows never cross episode boundaries).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeRecord {
    pub transitions: Vec<Transition>,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Bounded ring with FIFO eviction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> ReplayBuffer<T> {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    /// Uniform sample of `n` items with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<&T> {
        assert!(!self.items.is_empty());
        (0..n)
            .map(|_| &self.items[rng.below(self.items.len() as u64) as usize])
            .collect()
    }
}
