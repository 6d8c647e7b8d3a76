//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `EECLTD3\0`                         |
//! | 4     | format version (`u32`)                    |
//! | 8     | payload length (`u64`)                    |
//! | 8     | FNV-1a 64 checksum of the payload         |
//! | n     | payload: [`Checkpoint`] in fixed-width bincode |
//!
//! Floats are stored bit-exactly, so a restored agent evaluates identically.

use std::path::Path;

use bincode::Options;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::eecl::{DetectorSnapshot, NoveltyDetector};
use crate::nn::{Mlp, Optimizer};
use crate::td3::{Real, ReplayBuffer, ReplaySnapshot, Td3Agent, Td3Config};

pub const MAGIC: [u8; 8] = *b"EECLTD3\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub env: String,
    pub config: Td3Config,
    pub actor: Mlp<Real>,
    pub critic1: Mlp<Real>,
    pub critic2: Mlp<Real>,
    pub actor_target: Mlp<Real>,
    pub critic1_target: Mlp<Real>,
    pub critic2_target: Mlp<Real>,
    pub actor_opt: Optimizer<Real>,
    pub critic1_opt: Optimizer<Real>,
    pub critic2_opt: Optimizer<Real>,
    pub env_steps: u64,
    pub train_iterations: u64,
    pub replay: ReplaySnapshot,
    pub detector: Option<DetectorSnapshot>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn codec() -> impl Options {
    bincode::DefaultOptions::new()
        .with_fixint_encoding()
        .reject_trailing_bytes()
}

fn corrupt(path: &Path, message: impl ToString) -> HarnessError {
    HarnessError::CheckpointCorrupt {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn check_shape(
    network: &'static str,
    expected: Vec<usize>,
    found: Vec<usize>,
) -> Result<(), HarnessError> {
    if expected != found {
        return Err(HarnessError::CheckpointShape {
            network,
            expected,
            found,
        });
    }
    Ok(())
}

impl Checkpoint {
    pub fn capture(env: &str, agent: &Td3Agent, detector: Option<&NoveltyDetector>) -> Self {
        Self {
            env: env.to_string(),
            config: agent.config.clone(),
            actor: agent.actor.clone(),
            critic1: agent.critic1.clone(),
            critic2: agent.critic2.clone(),
            actor_target: agent.actor_target.clone(),
            critic1_target: agent.critic1_target.clone(),
            critic2_target: agent.critic2_target.clone(),
            actor_opt: agent.actor_opt.clone(),
            critic1_opt: agent.critic1_opt.clone(),
            critic2_opt: agent.critic2_opt.clone(),
            env_steps: agent.env_steps,
            train_iterations: agent.train_iterations,
            replay: agent.replay.snapshot(),
            detector: detector.map(NoveltyDetector::snapshot),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = codec()
            .serialize(self)
            .expect("checkpoint types always serialize");
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&fnv1a(&payload).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    /// `path` only labels diagnostics.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, HarnessError> {
        if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
            return Err(corrupt(path, "not a checkpoint file (bad magic)"));
        }
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(HarnessError::CheckpointVersion {
                path: path.to_path_buf(),
                found: version,
                expected: VERSION,
            });
        }
        let payload = &bytes[HEADER_LEN..];
        if u64_at(12) != payload.len() as u64 {
            return Err(corrupt(path, "payload length does not match header"));
        }
        if u64_at(20) != fnv1a(payload) {
            return Err(corrupt(path, "checksum mismatch"));
        }
        codec()
            .with_limit(payload.len() as u64)
            .deserialize(payload)
            .map_err(|e| corrupt(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    fn check_against(&self, actor: Vec<usize>, critic: Vec<usize>) -> Result<(), HarnessError> {
        let nets: [(&'static str, &Mlp<Real>, &Vec<usize>); 6] = [
            ("actor", &self.actor, &actor),
            ("critic1", &self.critic1, &critic),
            ("critic2", &self.critic2, &critic),
            ("actor_target", &self.actor_target, &actor),
            ("critic1_target", &self.critic1_target, &critic),
            ("critic2_target", &self.critic2_target, &critic),
        ];
        for (name, net, want) in nets {
            check_shape(name, want.clone(), net.layer_sizes())?;
        }
        let opts = [
            ("actor_opt", &self.actor_opt, &actor),
            ("critic1_opt", &self.critic1_opt, &critic),
            ("critic2_opt", &self.critic2_opt, &critic),
        ];
        for (name, opt, want) in opts {
            check_shape(name, want.clone(), opt.layer_sizes())?;
        }
        Ok(())
    }

    /// Rebuilds the agent and detector exactly as captured.
    pub fn restore(self, path: &Path) -> Result<(Td3Agent, Option<NoveltyDetector>), HarnessError> {
        self.config.validate()?;
        self.check_against(self.config.actor_sizes(), self.config.critic_sizes())?;
        let replay = ReplayBuffer::from_snapshot(self.replay)
            .ok_or_else(|| corrupt(path, "inconsistent replay buffer"))?;
        let detector = self
            .detector
            .map(NoveltyDetector::from_snapshot)
            .transpose()?;
        let agent = Td3Agent {
            config: self.config,
            actor: self.actor,
            critic1: self.critic1,
            critic2: self.critic2,
            actor_target: self.actor_target,
            critic1_target: self.critic1_target,
            critic2_target: self.critic2_target,
            actor_opt: self.actor_opt,
            critic1_opt: self.critic1_opt,
            critic2_opt: self.critic2_opt,
            replay,
            env_steps: self.env_steps,
            train_iterations: self.train_iterations,
        };
        Ok((agent, detector))
    }

    /// Loads the captured state into an existing agent, which must have the
    /// same architecture. The agent keeps its own configuration.
    pub fn load_into(
        self,
        agent: &mut Td3Agent,
        path: &Path,
    ) -> Result<Option<NoveltyDetector>, HarnessError> {
        self.check_against(agent.actor.layer_sizes(), agent.critic1.layer_sizes())?;
        let replay = ReplayBuffer::from_snapshot(self.replay)
            .ok_or_else(|| corrupt(path, "inconsistent replay buffer"))?;
        let detector = self
            .detector
            .map(NoveltyDetector::from_snapshot)
            .transpose()?;
        agent.actor = self.actor;
        agent.critic1 = self.critic1;
        agent.critic2 = self.critic2;
        agent.actor_target = self.actor_target;
        agent.critic1_target = self.critic1_target;
        agent.critic2_target = self.critic2_target;
        agent.actor_opt = self.actor_opt;
        agent.critic1_opt = self.critic1_opt;
        agent.critic2_opt = self.critic2_opt;
        agent.replay = replay;
        agent.env_steps = self.env_steps;
        agent.train_iterations = self.train_iterations;
        Ok(detector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_agent(hidden: Vec<usize>) -> Td3Agent {
        let mut c = Td3Config::new(6, 2, 1.0);
        c.hidden_sizes = hidden;
        c.replay_capacity = 10;
        Td3Agent::new(c, 1).unwrap()
    }

    #[test]
    fn header_checks() {
        let p = Path::new("x.ckpt");
        let bytes = Checkpoint::capture("pointmass", &small_agent(vec![4]), None).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes, p).is_ok());

        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(
            Checkpoint::from_bytes(&v2, p),
            Err(HarnessError::CheckpointVersion { found: 2, .. })
        ));
        let mut flipped = bytes.clone();
        *flipped.last_mut().unwrap() ^= 1;
        assert!(matches!(
            Checkpoint::from_bytes(&flipped, p),
            Err(HarnessError::CheckpointCorrupt { .. })
        ));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3], p),
            Err(HarnessError::CheckpointCorrupt { .. })
        ));
        assert!(matches!(
            Checkpoint::from_bytes(b"hello", p),
            Err(HarnessError::CheckpointCorrupt { .. })
        ));
    }

    #[test]
    fn mismatched_architecture_is_a_shape_error() {
        let ck = Checkpoint::capture("pointmass", &small_agent(vec![4]), None);
        let mut other = small_agent(vec![5]);
        match ck.load_into(&mut other, Path::new("x")) {
            Err(HarnessError::CheckpointShape {
                network,
                expected,
                found,
            }) => {
                assert_eq!(network, "actor");
                assert_eq!(expected, vec![6, 5, 2]);
                assert_eq!(found, vec![6, 4, 2]);
            }
            other => panic!("{other:?}"),
        }
    }
}
