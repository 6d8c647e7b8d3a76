//! Built-in continuous-control tasks.
//!
//! Both tasks are deterministic given the reset seed and the action sequence.
//! Constants (time step, link lengths, bonuses, horizons) are fixed so runs are
//! comparable.

mod armlift;
mod pointmass;

pub use armlift::{forward_kinematics, PlanarArmLift, LINK_LENGTHS};
pub use pointmass::PointMassReach;

use serde::{Deserialize, Serialize};

/// Integration time step shared by both tasks.
pub const DT: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("unknown environment `{0}` (expected `pointmass` or `armlift`)")]
    UnknownEnv(String),
    #[error("action length mismatch: expected {expected}, got {actual}")]
    ActionDim { expected: usize, actual: usize },
    #[error("step called on a finished episode; reset first")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    pub episode_horizon: usize,
    /// Largest absolute per-step reward the task can emit.
    pub reward_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The task reached a terminal (success) state.
    pub terminated: bool,
    /// The episode hit its horizon.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError>;

    fn boxed_clone(&self) -> Box<dyn Environment>;
}

impl Clone for Box<dyn Environment> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

pub const ENV_NAMES: [&str; 2] = [PointMassReach::NAME, PlanarArmLift::NAME];

pub fn make_env(name: &str) -> Result<Box<dyn Environment>, EnvError> {
    match name {
        PointMassReach::NAME => Ok(Box::new(PointMassReach::new())),
        PlanarArmLift::NAME => Ok(Box::new(PlanarArmLift::new())),
        other => Err(EnvError::UnknownEnv(other.to_owned())),
    }
}

pub fn env_spec(name: &str) -> Result<EnvSpec, EnvError> {
    make_env(name).map(|e| e.spec().clone())
}

/// Clamps each component into `[-bound, bound]`.
pub(crate) fn clamp_action(action: &[f64], bound: f64) -> Vec<f64> {
    action.iter().map(|a| a.clamp(-bound, bound)).collect()
}

/// Draws a point at uniform angle in `angle_range` and radius in
/// `radius_range`.
pub(crate) fn annulus_sample<R: rand::Rng>(
    rng: &mut R,
    radius_range: (f64, f64),
    angle_range: (f64, f64),
) -> [f64; 2] {
    let r = rng.gen_range(radius_range.0..=radius_range.1);
    let a = rng.gen_range(angle_range.0..=angle_range.1);
    [r * a.cos(), r * a.sin()]
}
