use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{annulus_sample, clamp_action, EnvError, EnvSpec, Environment, StepOutcome, DT};

pub const LINK_LENGTHS: [f64; 3] = [0.4, 0.3, 0.2];

/// End-effector position of the planar chain with [`LINK_LENGTHS`].
pub fn forward_kinematics(angles: &[f64; 3]) -> (f64, f64) {
    let mut heading = 0.0;
    let (mut x, mut y) = (0.0, 0.0);
    for (len, theta) in LINK_LENGTHS.iter().zip(angles) {
        heading += theta;
        x += len * heading.cos();
        y += len * heading.sin();
    }
    (x, y)
}

/// Three-link planar arm that must reach a block, close its gripper on it and
/// raise it.
///
/// Observation (12): `[q0, q1, q2, w0, w1, w2, ee_x, ee_y, obj_x, obj_y,
/// obj_height, grasped]`. Action (4): three joint torques and a gripper
/// command, all in `[-1, 1]`.
///
/// Grasping is a threshold event: it latches once the end effector is within
/// [`Self::GRASP_RADIUS`] of the block with a gripper command above
/// [`Self::GRIP_THRESHOLD`]. While grasped the block follows the end effector
/// and rises at `LIFT_RATE * max(grip, 0)`.
#[derive(Debug, Clone)]
pub struct PlanarArmLift {
    spec: EnvSpec,
    angles: [f64; 3],
    velocities: [f64; 3],
    object: [f64; 2],
    height: f64,
    grasped: bool,
    steps: usize,
    done: bool,
    started: bool,
}

impl PlanarArmLift {
    pub const NAME: &'static str = "armlift";
    pub const HORIZON: usize = 300;
    pub const TORQUE_GAIN: f64 = 2.0;
    pub const DAMPING: f64 = 1.0;
    pub const OBJECT_RADIUS: (f64, f64) = (0.4, 0.8);
    pub const OBJECT_ANGLE: (f64, f64) =
        (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    pub const GRASP_RADIUS: f64 = 0.05;
    pub const GRIP_THRESHOLD: f64 = 0.5;
    pub const LIFT_RATE: f64 = 0.5;
    pub const LIFT_REWARD_SCALE: f64 = 10.0;
    pub const SUCCESS_HEIGHT: f64 = 0.3;
    pub const SUCCESS_BONUS: f64 = 50.0;

    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: Self::NAME.to_owned(),
                state_dim: 12,
                action_dim: 4,
                action_bound: 1.0,
                episode_horizon: Self::HORIZON,
                // reach term is at most the arm span plus the farthest block
                reward_bound: Self::SUCCESS_BONUS
                    + Self::LIFT_REWARD_SCALE * Self::LIFT_RATE * DT
                    + 2.0,
            },
            angles: [0.0; 3],
            velocities: [0.0; 3],
            object: [0.0; 2],
            height: 0.0,
            grasped: false,
            steps: 0,
            done: false,
            started: false,
        }
    }

    pub fn object(&self) -> [f64; 2] {
        self.object
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn grasped(&self) -> bool {
        self.grasped
    }

    /// Places the arm at the given joint angles, at rest. Test helper.
    pub fn set_joint_angles(&mut self, angles: [f64; 3]) {
        self.angles = angles;
        self.velocities = [0.0; 3];
    }

    fn observation(&self) -> Vec<f64> {
        let (ex, ey) = forward_kinematics(&self.angles);
        let mut obs = Vec::with_capacity(12);
        obs.extend_from_slice(&self.angles);
        obs.extend_from_slice(&self.velocities);
        obs.extend_from_slice(&[ex, ey, self.object[0], self.object[1], self.height]);
        obs.push(if self.grasped { 1.0 } else { 0.0 });
        obs
    }
}

impl Default for PlanarArmLift {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PlanarArmLift {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.object = annulus_sample(&mut rng, Self::OBJECT_RADIUS, Self::OBJECT_ANGLE);
        self.angles = [0.0; 3];
        self.velocities = [0.0; 3];
        self.height = 0.0;
        self.grasped = false;
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
        let a = clamp_action(action, self.spec.action_bound);
        for j in 0..3 {
            self.velocities[j] +=
                DT * (Self::TORQUE_GAIN * a[j] - Self::DAMPING * self.velocities[j]);
            self.angles[j] += DT * self.velocities[j];
        }
        let grip = a[3];
        let (ex, ey) = forward_kinematics(&self.angles);
        let mut terminated = false;
        let reward = if self.grasped {
            self.object = [ex, ey];
            let gain = DT * Self::LIFT_RATE * grip.max(0.0);
            self.height += gain;
            let mut r = Self::LIFT_REWARD_SCALE * gain;
            if self.height > Self::SUCCESS_HEIGHT {
                r += Self::SUCCESS_BONUS;
                terminated = true;
            }
            r
        } else {
            let dist = (ex - self.object[0]).hypot(ey - self.object[1]);
            if dist < Self::GRASP_RADIUS && grip > Self::GRIP_THRESHOLD {
                self.grasped = true;
                self.object = [ex, ey];
            }
            -dist
        };
        self.steps += 1;
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::FRAC_PI_2;

    /// Rotates each link vector by its accumulated angle with a 2x2 matrix.
    fn chain_oracle(angles: &[f64; 3]) -> (f64, f64) {
        let mut dir = [1.0, 0.0];
        let mut tip = [0.0, 0.0];
        for (len, th) in LINK_LENGTHS.iter().zip(angles) {
            let (s, c) = th.sin_cos();
            dir = [c * dir[0] - s * dir[1], s * dir[0] + c * dir[1]];
            tip = [tip[0] + len * dir[0], tip[1] + len * dir[1]];
        }
        (tip[0], tip[1])
    }

    #[test]
    fn straight_arm_kinematics() {
        let (x, y) = forward_kinematics(&[0.0, 0.0, 0.0]);
        assert!((x - 0.9).abs() < 1e-15 && y == 0.0);
        let (x, y) = forward_kinematics(&[FRAC_PI_2, 0.0, 0.0]);
        assert!(x.abs() < 1e-15 && (y - 0.9).abs() < 1e-15);
    }

    #[test]
    fn kinematics_match_rotation_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let th = [
                rng.gen_range(-3.2..3.2),
                rng.gen_range(-3.2..3.2),
                rng.gen_range(-3.2..3.2),
            ];
            let (x, y) = forward_kinematics(&th);
            let (ox, oy) = chain_oracle(&th);
            assert!((x - ox).abs() < 1e-12 && (y - oy).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pose_observation() {
        let mut env = PlanarArmLift::new();
        let obs = env.reset(0);
        assert_eq!(obs.len(), 12);
        assert!((obs[6] - 0.9).abs() < 1e-15);
        assert_eq!(obs[7], 0.0);
    }

    #[test]
    fn objects_lie_in_annulus() {
        let mut env = PlanarArmLift::new();
        for seed in 0..100 {
            env.reset(seed);
            let o = env.object();
            let r = o[0].hypot(o[1]);
            assert!((0.4 - 1e-12..=0.8 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn observation_tracks_kinematics_and_height_rules() {
        let mut env = PlanarArmLift::new();
        env.reset(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut prev_height = 0.0;
        for _ in 0..PlanarArmLift::HORIZON {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let was_grasped = env.grasped();
            let out = env.step(&a).unwrap();
            let o = &out.observation;
            let (x, y) = forward_kinematics(&[o[0], o[1], o[2]]);
            assert!((o[6] - x).abs() <= 1e-12 && (o[7] - y).abs() <= 1e-12);
            if was_grasped {
                assert!(o[10] >= prev_height);
            } else {
                assert_eq!(o[10], prev_height);
            }
            prev_height = o[10];
            if out.done() {
                break;
            }
        }
    }

    #[test]
    fn grasp_then_lift_to_success() {
        let mut env = PlanarArmLift::new();
        env.reset(0);
        // Put the block under the straight arm's tip.
        env.object = [0.9, 0.0];
        let out = env.step(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(env.grasped());
        assert!(out.reward <= 0.0);
        let mut total = 0.0;
        let mut done = false;
        for _ in 0..20 {
            let out = env.step(&[0.0, 0.0, 0.0, 1.0]).unwrap();
            total += out.reward;
            if out.terminated {
                done = true;
                break;
            }
        }
        assert!(done);
        assert!(env.height() > PlanarArmLift::SUCCESS_HEIGHT);
        assert!(total > PlanarArmLift::SUCCESS_BONUS);
    }

    #[test]
    fn weak_grip_does_not_grasp() {
        let mut env = PlanarArmLift::new();
        env.reset(0);
        env.object = [0.9, 0.0];
        env.step(&[0.0, 0.0, 0.0, 0.4]).unwrap();
        assert!(!env.grasped());
    }
}
