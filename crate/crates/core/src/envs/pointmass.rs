use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{annulus_sample, clamp_action, EnvError, EnvSpec, Environment, StepOutcome, DT};

/// 2-D point mass pushed by a bounded force toward a goal.
///
/// Observation: `[px, py, vx, vy, gx, gy]`. Dynamics are a velocity-damped
/// double integrator; reaching within [`Self::SUCCESS_RADIUS`] of the goal pays
/// [`Self::SUCCESS_BONUS`] and ends the episode.
#[derive(Debug, Clone)]
pub struct PointMassReach {
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    goal: [f64; 2],
    steps: usize,
    done: bool,
    started: bool,
}

impl PointMassReach {
    pub const NAME: &'static str = "pointmass";
    pub const HORIZON: usize = 200;
    pub const DAMPING: f64 = 1.0;
    pub const POS_LIMIT: f64 = 2.0;
    pub const GOAL_RADIUS: (f64, f64) = (0.75, 1.5);
    pub const SUCCESS_RADIUS: f64 = 0.05;
    pub const SUCCESS_BONUS: f64 = 5.0;

    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: Self::NAME.to_owned(),
                state_dim: 6,
                action_dim: 2,
                action_bound: 1.0,
                episode_horizon: Self::HORIZON,
                reward_bound: Self::SUCCESS_BONUS,
            },
            pos: [0.0; 2],
            vel: [0.0; 2],
            goal: [0.0; 2],
            steps: 0,
            done: false,
            started: false,
        }
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.goal[0],
            self.goal[1],
        ]
    }

    fn goal_distance(&self) -> f64 {
        (self.pos[0] - self.goal[0]).hypot(self.pos[1] - self.goal[1])
    }
}

impl Default for PointMassReach {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointMassReach {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.goal = annulus_sample(
            &mut rng,
            Self::GOAL_RADIUS,
            (-std::f64::consts::PI, std::f64::consts::PI),
        );
        self.pos = [0.0; 2];
        self.vel = [0.0; 2];
        self.steps = 0;
        self.done = false;
        self.started = true;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if action.len() != self.spec.action_dim {
            return Err(EnvError::ActionDim {
                expected: self.spec.action_dim,
                actual: action.len(),
            });
        }
        let force = clamp_action(action, self.spec.action_bound);
        for i in 0..2 {
            self.vel[i] += DT * (force[i] - Self::DAMPING * self.vel[i]);
            self.pos[i] += DT * self.vel[i];
            if self.pos[i].abs() > Self::POS_LIMIT {
                self.pos[i] = self.pos[i].clamp(-Self::POS_LIMIT, Self::POS_LIMIT);
                self.vel[i] = 0.0;
            }
        }
        self.steps += 1;
        let dist = self.goal_distance();
        let terminated = dist < Self::SUCCESS_RADIUS;
        let reward = if terminated {
            Self::SUCCESS_BONUS - dist
        } else {
            -dist
        };
        let truncated = !terminated && self.steps >= Self::HORIZON;
        self.done = terminated || truncated;
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            terminated,
            truncated,
        })
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
