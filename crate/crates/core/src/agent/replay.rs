use std::collections::VecDeque;

use rand::Rng;

use super::state::DurationState;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Intersection that produced the transition.
    pub node: usize,
    pub state: DurationState,
    /// Index into the duration space.
    pub action: usize,
    pub reward: f64,
    /// State at the next decision, carrying the phase picked there.
    pub next_state: DurationState,
    pub terminal: bool,
}

/// FIFO experience store shared by all intersections.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)), pushed: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Transitions ever pushed, including evicted ones.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.pushed += 1;
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// `min(n, len)` distinct transitions in random order.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let k = n.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), k).into_iter().map(|i| &self.items[i]).collect()
    }
}
