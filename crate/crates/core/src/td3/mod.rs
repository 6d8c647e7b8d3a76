//! Twin Delayed DDPG with an optional novelty bonus folded into the stored
//! reward.

mod agent;
mod config;
mod replay;

pub use agent::{
    warmup_action, AgentRngs, EnvRunner, NoveltyHook, StepReport, Td3Agent, TrainReport,
};
pub use config::Td3Config;
pub use replay::{Batch, ReplayBuffer, ReplayMeta, ReplaySnapshot, Transition};

/// Network precision used for training.
pub type Real = f64;

use crate::eecl::EeclError;
use crate::envs::EnvError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Novelty(#[from] EeclError),
    #[error("invalid TD3 parameter `{field}` = {value}: {expected}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("{what} dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite {what} ({value}) at training iteration {iteration}")]
    NonFinite {
        what: &'static str,
        value: f64,
        iteration: u64,
    },
}
