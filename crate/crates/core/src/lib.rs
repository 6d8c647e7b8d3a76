//! TD3 with a kd-tree novelty bonus.
//!
//! - [`nn`]: dense networks, Adam/AdamW, Polyak averaging.
//! - [`eecl`]: the novelty detector and its k-d tree.
//! - [`td3`]: the learner, replay buffer and training step.
//! - [`envs`]: built-in point-mass and planar-arm tasks.
//! - [`harness`]: configuration, training runs, paired comparisons, CSV,
//!   plots and checkpoints.

pub mod eecl;
pub mod envs;
pub mod harness;
pub mod nn;
pub mod seeding;
pub mod td3;
