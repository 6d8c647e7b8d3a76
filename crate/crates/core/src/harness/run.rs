use std::path::{Path, PathBuf};

use super::checkpoint::Checkpoint;
use super::{CurveRecord, HarnessError, LearningCurve, RunConfig};
use crate::eecl::NoveltyDetector;
use crate::envs::make_env;
use crate::seeding::{stream, stream_rng};
use crate::td3::{AgentRngs, EnvRunner, NoveltyHook, Td3Agent};

/// How the detector participates in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoveltyMode {
    /// Plain TD3, no detector.
    Off,
    /// The bonus is added to stored rewards.
    Reward,
    /// A detector counts novel states but pays nothing.
    Observe,
}

/// A finished run, not yet written anywhere.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub mode: NoveltyMode,
    pub env: String,
    pub curve: LearningCurve,
    pub agent: Td3Agent,
    pub detector: Option<NoveltyDetector>,
}

impl RunOutput {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.env, &self.agent, self.detector.as_ref())
    }

    /// Writes `<stem>.csv` and `<stem>.ckpt` under `dir`; returns both paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        let ckpt = dir.join(format!("{stem}.ckpt"));
        self.curve.save(&csv)?;
        self.checkpoint().save(&ckpt)?;
        Ok((csv, ckpt))
    }
}

/// Runs `total_steps` agent steps for one seed, evaluating at step 0, every
/// `eval_every` steps and at the final step. Performs no I/O.
pub fn train(config: &RunConfig, seed: u64, mode: NoveltyMode) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let mut detector = match (mode, &config.eecl) {
        (NoveltyMode::Off, _) => None,
        (_, Some(cfg)) => Some(NoveltyDetector::new(cfg.clone())?),
        (_, None) => return Err(HarnessError::MissingNovelty),
    };
    let env = make_env(&config.env)?;
    let eval_env = env.boxed_clone();
    let mut runner = EnvRunner::new(env, seed);
    let mut agent = Td3Agent::new(config.td3.clone(), seed)?;
    let mut rngs = AgentRngs::from_seed(seed);
    let mut eval_rng = stream_rng(seed, stream::EVALUATION);

    let total = config.td3.total_steps;
    let mut env_return = 0.0;
    let mut bonus_paid = 0.0;
    let mut records = Vec::new();
    let mut record = |step: u64,
                      agent: &Td3Agent,
                      det: Option<&NoveltyDetector>,
                      env_return: f64,
                      bonus_paid: f64| {
        let mean_eval_return =
            agent.evaluate(eval_env.as_ref(), config.eval_episodes, &mut eval_rng)?;
        records.push(CurveRecord {
            step,
            mean_eval_return,
            cumulative_env_reward: env_return,
            novel_state_count: det.map_or(0, NoveltyDetector::novel_count),
            cumulative_exploration_reward: bonus_paid,
        });
        Ok::<_, HarnessError>(())
    };

    record(0, &agent, detector.as_ref(), env_return, bonus_paid)?;
    for t in 1..=total {
        let hook = match (mode, detector.as_mut()) {
            (NoveltyMode::Reward, Some(d)) => NoveltyHook::Reward(d),
            (NoveltyMode::Observe, Some(d)) => NoveltyHook::Observe(d),
            _ => NoveltyHook::Off,
        };
        let rep = agent.agent_step(hook, &mut runner, &mut rngs)?;
        env_return += rep.env_reward;
        bonus_paid += rep.bonus;
        if t % config.eval_every == 0 || t == total {
            record(t, &agent, detector.as_ref(), env_return, bonus_paid)?;
        }
    }

    Ok(RunOutput {
        seed,
        mode,
        env: config.env.clone(),
        curve: LearningCurve { records },
        agent,
        detector,
    })
}

/// One run as configured: EECL when `config.eecl` is set, plain TD3
/// otherwise. Writes `<arm>_seed<seed>.csv` and `.ckpt` into `out_dir`.
pub fn run_training(config: &RunConfig, seed: u64) -> Result<LearningCurve, HarnessError> {
    let (mode, arm) = match config.eecl {
        Some(_) => (NoveltyMode::Reward, "eecl"),
        None => (NoveltyMode::Off, "td3"),
    };
    let out = train(config, seed, mode)?;
    out.write(&config.out_dir, &format!("{arm}_seed{seed}"))?;
    Ok(out.curve)
}
