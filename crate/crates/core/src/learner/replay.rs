use rand::seq::index::sample;
use rand::Rng;

/// One transition. States are stored as compact observations
/// (see [`crate::game::GameState::observation`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<u8>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<u8>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer; the oldest experience is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: Vec::new(), next: 0 }
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

    pub fn push(&mut self, exp: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(exp);
        } else {
            self.items[self.next] = exp;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample of `batch` distinct experiences, or `None` unless the
    /// buffer holds strictly more than `batch`.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<&Experience>> {
        if self.items.len() <= batch {
            return None;
        }
        Some(sample(rng, self.items.len(), batch).into_iter().map(|i| &self.items[i]).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn exp(i: usize) -> Experience {
        Experience { state: vec![i as u8], action: i, reward: 0.0, next_state: vec![], terminal: false }
    }

    #[test]
    fn evicts_oldest_at_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(exp(i));
            assert!(buf.len() <= 3);
        }
        let mut actions: Vec<_> = buf.iter().map(|e| e.action).collect();
        actions.sort();
        assert_eq!(actions, vec![2, 3, 4]);
    }

    #[test]
    fn sampling_guard_and_determinism() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..4 {
            buf.push(exp(i));
        }
        assert!(buf.sample(4, &mut rng::stream(0, "s")).is_none());
        buf.push(exp(4));
        let a: Vec<_> = buf.sample(4, &mut rng::stream(0, "s")).unwrap().iter().map(|e| e.action).collect();
        let b: Vec<_> = buf.sample(4, &mut rng::stream(0, "s")).unwrap().iter().map(|e| e.action).collect();
        assert_eq!(a, b);
        let mut uniq = a.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 4);
    }
}
