use serde::{Deserialize, Serialize};

use super::AgentError;

/// TD3 hyperparameters. The dimension fields come from the environment; the
/// rest default to the reference protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    /// Hidden widths shared by the actor and both critics.
    pub hidden_sizes: Vec<usize>,
    pub discount: f64,
    pub tau: f64,
    pub policy_delay: u64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub critic_weight_decay: f64,
    /// Exploration noise std, in units of `action_bound`.
    pub explore_sigma: f64,
    /// Target-policy smoothing noise std, in units of `action_bound`.
    pub smooth_sigma: f64,
    /// Clip for the smoothing noise, in units of `action_bound`.
    pub smooth_clip: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl Td3Config {
    pub const HIDDEN_SIZES: [usize; 2] = [400, 300];
    pub const DISCOUNT: f64 = 0.99;
    pub const TAU: f64 = 0.005;
    pub const POLICY_DELAY: u64 = 2;
    pub const BATCH_SIZE: usize = 128;
    pub const REPLAY_CAPACITY: usize = 1_000_000;
    pub const ACTOR_LR: f64 = 0.001;
    pub const CRITIC_LR: f64 = 0.001;
    pub const CRITIC_WEIGHT_DECAY: f64 = 0.005;
    pub const EXPLORE_SIGMA: f64 = 0.1;
    pub const SMOOTH_SIGMA: f64 = 0.2;
    pub const SMOOTH_CLIP: f64 = 0.5;
    pub const WARMUP_STEPS: u64 = 1000;
    pub const TOTAL_STEPS: u64 = 5000;

    pub fn new(state_dim: usize, action_dim: usize, action_bound: f64) -> Self {
        Self {
            state_dim,
            action_dim,
            action_bound,
            hidden_sizes: Self::HIDDEN_SIZES.to_vec(),
            discount: Self::DISCOUNT,
            tau: Self::TAU,
            policy_delay: Self::POLICY_DELAY,
            batch_size: Self::BATCH_SIZE,
            replay_capacity: Self::REPLAY_CAPACITY,
            actor_lr: Self::ACTOR_LR,
            critic_lr: Self::CRITIC_LR,
            critic_weight_decay: Self::CRITIC_WEIGHT_DECAY,
            explore_sigma: Self::EXPLORE_SIGMA,
            smooth_sigma: Self::SMOOTH_SIGMA,
            smooth_clip: Self::SMOOTH_CLIP,
            warmup_steps: Self::WARMUP_STEPS,
            total_steps: Self::TOTAL_STEPS,
        }
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.state_dim];
        s.extend(&self.hidden_sizes);
        s.push(self.action_dim);
        s
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.state_dim + self.action_dim];
        s.extend(&self.hidden_sizes);
        s.push(1);
        s
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        fn bad(field: &'static str, value: f64, expected: &'static str) -> Result<(), AgentError> {
            Err(AgentError::InvalidParameter {
                field,
                value,
                expected,
            })
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if self.state_dim == 0 {
            return bad("state_dim", 0.0, "must be positive");
        }
        if self.action_dim == 0 {
            return bad("action_dim", 0.0, "must be positive");
        }
        if !positive(self.action_bound) {
            return bad("action_bound", self.action_bound, "must be positive");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes", 0.0, "widths must be positive");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount", self.discount, "must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", self.tau, "must lie in (0, 1]");
        }
        if self.policy_delay == 0 {
            return bad("policy_delay", 0.0, "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", 0.0, "must be positive");
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity", 0.0, "must be positive");
        }
        if !positive(self.actor_lr) {
            return bad("actor_lr", self.actor_lr, "must be positive");
        }
        if !positive(self.critic_lr) {
            return bad("critic_lr", self.critic_lr, "must be positive");
        }
        if !non_negative(self.critic_weight_decay) {
            return bad(
                "critic_weight_decay",
                self.critic_weight_decay,
                "must be non-negative",
            );
        }
        if !non_negative(self.explore_sigma) {
            return bad("explore_sigma", self.explore_sigma, "must be non-negative");
        }
        if !non_negative(self.smooth_sigma) {
            return bad("smooth_sigma", self.smooth_sigma, "must be non-negative");
        }
        if !positive(self.smooth_clip) {
            return bad("smooth_clip", self.smooth_clip, "must be positive");
        }
        Ok(())
    }
}

impl Default for Td3Config {
    fn default() -> Self {
        Self::new(0, 0, 1.0)
    }
}
