//! Novelty-driven exploration bonus.
//!
//! A [`NoveltyDetector`] keeps a bounded FIFO memory of visited states indexed
//! by a [`KdTree`]. A state is novel when its nearest stored neighbour is at
//! least `epsilon` away (or memory is empty). Each novel state earns
//! `r_max * decay^n`, where `n` counts the novel states accepted before it.

pub mod kdtree;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use kdtree::{KdTree, Neighbor};

/// Rebuild the tree after this many incremental insertions.
pub const REBUILD_INTERVAL: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum EeclError {
    #[error("state dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid novelty parameter `{field}` = {value}: {expected}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoveltyConfig {
    /// Filled from the environment when loaded from a config file.
    pub state_dim: usize,
    /// Distance threshold for a state to count as novel.
    pub epsilon: f64,
    /// Bonus paid for the first novel state.
    pub r_max: f64,
    /// Per-discovery decay of the bonus.
    pub decay: f64,
    pub max_states: usize,
}

impl NoveltyConfig {
    pub const EPSILON: f64 = 0.1;
    pub const R_MAX: f64 = 0.75;
    pub const DECAY: f64 = 0.997;
    pub const MAX_STATES: usize = 1000;

    pub fn new(state_dim: usize) -> Self {
        Self {
            state_dim,
            epsilon: Self::EPSILON,
            r_max: Self::R_MAX,
            decay: Self::DECAY,
            max_states: Self::MAX_STATES,
        }
    }

    pub fn validate(&self) -> Result<(), EeclError> {
        let bad = |field, value: f64, expected| {
            Err(EeclError::InvalidParameter {
                field,
                value,
                expected,
            })
        };
        if self.state_dim == 0 {
            return bad("state_dim", 0.0, "must be positive");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon", self.epsilon, "must be a positive finite real");
        }
        if !(self.r_max.is_finite() && self.r_max >= 0.0) {
            return bad("r_max", self.r_max, "must be non-negative and finite");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay", self.decay, "must lie in (0, 1]");
        }
        if self.max_states == 0 {
            return bad("max_states", 0.0, "must be at least 1");
        }
        Ok(())
    }
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        Self::new(0)
    }
}

/// Serializable snapshot: config, states oldest first, and counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSnapshot {
    pub config: NoveltyConfig,
    pub states: Vec<Vec<f64>>,
    pub novel_count: u64,
    pub reward_sum: f64,
}

#[derive(Debug, Clone)]
pub struct NoveltyDetector {
    config: NoveltyConfig,
    buffer: VecDeque<(u64, Vec<f64>)>,
    tree: KdTree,
    next_id: u64,
    since_rebuild: usize,
    novel_count: u64,
    reward_sum: f64,
}

impl NoveltyDetector {
    pub fn new(config: NoveltyConfig) -> Result<Self, EeclError> {
        config.validate()?;
        Ok(Self {
            tree: KdTree::new(config.state_dim),
            buffer: VecDeque::with_capacity(config.max_states),
            config,
            next_id: 0,
            since_rebuild: 0,
            novel_count: 0,
            reward_sum: 0.0,
        })
    }

    pub fn config(&self) -> &NoveltyConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Stored states, oldest first.
    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.buffer.iter().map(|(_, s)| s.as_slice())
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    pub fn novel_count(&self) -> u64 {
        self.novel_count
    }

    fn check_dim(&self, state: &[f64]) -> Result<(), EeclError> {
        if state.len() != self.config.state_dim {
            return Err(EeclError::DimensionMismatch {
                expected: self.config.state_dim,
                actual: state.len(),
            });
        }
        Ok(())
    }

    /// Nearest stored state, or `None` while memory is empty.
    pub fn nearest(&self, state: &[f64]) -> Result<Option<Neighbor>, EeclError> {
        self.check_dim(state)?;
        self.tree.nearest(state)
    }

    pub fn novelty_check(&self, state: &[f64]) -> Result<bool, EeclError> {
        Ok(match self.nearest(state)? {
            None => true,
            Some(n) => n.distance >= self.config.epsilon,
        })
    }

    /// Bonus the next novel state would earn.
    pub fn exploration_reward(&self) -> f64 {
        let n = i32::try_from(self.novel_count).unwrap_or(i32::MAX);
        self.config.r_max * self.config.decay.powi(n)
    }

    /// Total bonus paid so far.
    pub fn cumulative_exploration_reward(&self) -> f64 {
        self.reward_sum
    }

    /// Returns the bonus for `state` and remembers it when novel; returns 0
    /// and changes nothing otherwise.
    pub fn record_state(&mut self, state: &[f64]) -> Result<f64, EeclError> {
        if !self.novelty_check(state)? {
            return Ok(0.0);
        }
        let reward = self.exploration_reward();
        let id = self.next_id;
        self.next_id += 1;
        self.buffer.push_back((id, state.to_vec()));
        if self.buffer.len() > self.config.max_states {
            self.buffer.pop_front();
            self.rebuild_tree();
        } else {
            self.tree.insert(id, state)?;
            self.since_rebuild += 1;
            if self.since_rebuild >= REBUILD_INTERVAL {
                self.rebuild_tree();
            }
        }
        self.novel_count += 1;
        self.reward_sum += reward;
        Ok(reward)
    }

    fn rebuild_tree(&mut self) {
        self.tree = KdTree::build_with_ids(
            self.config.state_dim,
            self.buffer.iter().map(|(id, s)| (*id, s.as_slice())),
        )
        .expect("buffer states are dimension-checked on entry");
        self.since_rebuild = 0;
    }

    pub fn snapshot(&self) -> DetectorSnapshot {
        DetectorSnapshot {
            config: self.config.clone(),
            states: self.buffer.iter().map(|(_, s)| s.clone()).collect(),
            novel_count: self.novel_count,
            reward_sum: self.reward_sum,
        }
    }

    pub fn from_snapshot(snap: DetectorSnapshot) -> Result<Self, EeclError> {
        let mut det = Self::new(snap.config)?;
        if snap.states.len() > det.config.max_states {
            return Err(EeclError::InvalidParameter {
                field: "states",
                value: snap.states.len() as f64,
                expected: "no more states than max_states",
            });
        }
        for s in snap.states {
            det.check_dim(&s)?;
            det.buffer.push_back((det.next_id, s));
            det.next_id += 1;
        }
        det.rebuild_tree();
        det.novel_count = snap.novel_count;
        det.reward_sum = snap.reward_sum;
        Ok(det)
    }
}
