use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;

use crate::env::EpisodeRecord;

/// First-in-first-out episode store with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Arc<EpisodeRecord>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            episodes: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Appends an episode, evicting the oldest one when full.
    pub fn push(&mut self, episode: impl Into<Arc<EpisodeRecord>>) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode.into());
    }

    /// `min(n, len)` distinct episodes chosen uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Arc<EpisodeRecord>> {
        let n = n.min(self.episodes.len());
        sample(rng, self.episodes.len(), n)
            .into_iter()
            .map(|i| self.episodes[i].clone())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<EpisodeRecord>> {
        self.episodes.iter()
    }
}
