use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// Environment reward plus any exploration bonus paid at collection time.
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for terminal states; time-limit truncation is not terminal.
    pub done: bool,
}

/// Column-stacked mini-batch, converted to the networks' precision.
#[derive(Debug, Clone)]
pub struct Batch<T = f64> {
    pub states: Array2<T>,
    pub actions: Array2<T>,
    pub rewards: Array1<T>,
    pub next_states: Array2<T>,
    pub dones: Array1<T>,
}

fn fill_row<T: Scalar>(mut row: ndarray::ArrayViewMut1<'_, T>, values: &[f64]) {
    assert_eq!(row.len(), values.len(), "transition width");
    for (dst, &v) in row.iter_mut().zip(values) {
        *dst = T::cast(v);
    }
}

impl<T: Scalar> Batch<T> {
    pub fn from_transitions<'a, I>(items: I, state_dim: usize, action_dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a Transition>,
        I::IntoIter: ExactSizeIterator,
    {
        let items = items.into_iter();
        let n = items.len();
        let mut states = Array2::zeros((n, state_dim));
        let mut actions = Array2::zeros((n, action_dim));
        let mut rewards = Array1::zeros(n);
        let mut next_states = Array2::zeros((n, state_dim));
        let mut dones = Array1::zeros(n);
        for (i, t) in items.enumerate() {
            fill_row(states.row_mut(i), &t.state);
            fill_row(actions.row_mut(i), &t.action);
            fill_row(next_states.row_mut(i), &t.next_state);
            rewards[i] = T::cast(t.reward);
            dones[i] = if t.done { T::one() } else { T::zero() };
        }
        Self {
            states,
            actions,
            rewards,
            next_states,
            dones,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring buffer; once full, each push overwrites the oldest
/// transition.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

/// Size bookkeeping stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayMeta {
    pub capacity: usize,
    pub len: usize,
    pub cursor: usize,
}

/// Full contents, for checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySnapshot {
    pub meta: ReplayMeta,
    pub items: Vec<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        }
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

    pub fn meta(&self) -> ReplayMeta {
        ReplayMeta {
            capacity: self.capacity,
            len: self.items.len(),
            cursor: self.cursor,
        }
    }

    pub fn snapshot(&self) -> ReplaySnapshot {
        ReplaySnapshot {
            meta: self.meta(),
            items: self.items.clone(),
        }
    }

    /// Rebuilds a buffer; `None` if the snapshot's bookkeeping is
    /// inconsistent.
    pub fn from_snapshot(snap: ReplaySnapshot) -> Option<Self> {
        let ReplayMeta {
            capacity,
            len,
            cursor,
        } = snap.meta;
        let consistent = capacity > 0
            && len == snap.items.len()
            && len <= capacity
            && cursor < capacity
            && (len == capacity || cursor == len % capacity);
        consistent.then(|| Self {
            capacity,
            items: snap.items,
            cursor,
        })
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    /// Uniform indices, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(
            !self.items.is_empty(),
            "cannot sample an empty replay buffer"
        );
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }

    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch<T> {
        let idx = self.sample_indices(n, rng);
        let first = &self.items[0];
        Batch::from_transitions(
            idx.iter().map(|&i| &self.items[i]),
            first.state.len(),
            first.action.len(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition {
            state: vec![r],
            action: vec![0.0],
            reward: r,
            next_state: vec![r + 1.0],
            done: false,
        }
    }

    #[test]
    fn overwrites_oldest_when_full() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(i as f64));
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| buf.get(i).unwrap().reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
        assert_eq!(
            buf.meta(),
            ReplayMeta {
                capacity: 3,
                len: 3,
                cursor: 2
            }
        );
    }

    #[test]
    fn batch_layout() {
        let mut buf = ReplayBuffer::new(10);
        buf.push(t(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b: Batch = buf.sample(4, &mut rng);
        assert_eq!(b.len(), 4);
        assert_eq!(b.states.dim(), (4, 1));
        assert!(b.next_states.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn sampling_is_uniform() {
        // Chi-square goodness of fit with 99 degrees of freedom; the p = 0.001
        // critical value is 148.23.
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(t(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 100];
        for i in buf.sample_indices(100_000, &mut rng) {
            counts[i] += 1;
        }
        let expected = 1000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 148.23, "chi2 = {chi2}");
    }
}
