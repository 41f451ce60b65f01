use std::collections::VecDeque;

use rand::Rng;

use crate::error::{usage, Result};

/// One transition. States are flattened feature windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub s: Vec<f64>,
    pub a_yaw: usize,
    pub a_pitch: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer; the oldest experience is evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Experience>,
    pushed: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return usage("replay capacity must be positive");
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
            pushed: 0,
        })
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

    /// Total number of experiences ever pushed.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
        self.pushed += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// `batch` distinct experiences drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        if batch == 0 || batch > self.items.len() {
            return usage(format!("cannot sample {batch} from a memory holding {}", self.items.len()));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
