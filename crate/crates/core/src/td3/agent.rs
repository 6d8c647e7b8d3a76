use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::Distribution;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{AgentError, Batch, Real, ReplayBuffer, Td3Config, Transition};
use crate::eecl::NoveltyDetector;
use crate::envs::{Environment, StepOutcome};
use crate::nn::{soft_update, Gradients, Mlp, Optimizer, OutputActivation, Scalar};
use crate::seeding::{derive_seed, stream, stream_rng};

/// Random streams consumed by [`Td3Agent::agent_step`].
#[derive(Debug, Clone)]
pub struct AgentRngs {
    /// Warmup actions and exploration noise.
    pub actions: ChaCha8Rng,
    /// Mini-batch indices and target smoothing noise.
    pub training: ChaCha8Rng,
}

impl AgentRngs {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            actions: stream_rng(seed, stream::ACTIONS),
            training: stream_rng(seed, stream::TRAINING),
        }
    }
}

/// How the novelty detector takes part in a step.
pub enum NoveltyHook<'a> {
    Off,
    /// Record `s'` and add the bonus to the stored reward.
    Reward(&'a mut NoveltyDetector),
    /// Record `s'` for bookkeeping only; the stored reward is untouched.
    Observe(&'a mut NoveltyDetector),
}

/// Owns the environment and the current observation across episodes. Episode
/// `k` is reset with a seed derived from `(seed, k)`.
pub struct EnvRunner {
    env: Box<dyn Environment>,
    observation: Vec<f64>,
    episode_seed: u64,
    episode: u64,
    episode_return: f64,
}

impl EnvRunner {
    pub fn new(mut env: Box<dyn Environment>, seed: u64) -> Self {
        let episode_seed = derive_seed(seed, stream::EPISODES);
        let observation = env.reset(derive_seed(episode_seed, 0));
        Self {
            env,
            observation,
            episode_seed,
            episode: 0,
            episode_return: 0.0,
        }
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    /// Index of the episode in progress.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    fn advance(&mut self, out: &StepOutcome) {
        self.episode_return += out.reward;
        if out.done() {
            self.episode += 1;
            self.episode_return = 0.0;
            self.observation = self.env.reset(derive_seed(self.episode_seed, self.episode));
        } else {
            self.observation.clone_from(&out.observation);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub critic_losses: (f64, f64),
    /// Mean `Q1(s, pi(s))` before the actor step, when the delayed branch ran.
    pub actor_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub env_reward: f64,
    /// Bonus added to the stored reward (zero unless the hook is `Reward`).
    pub bonus: f64,
    /// Whether the detector accepted `s'`.
    pub novel: bool,
    pub done: bool,
    pub train: Option<TrainReport>,
}

/// Uniform action in `[-bound, bound]^action_dim`.
pub fn warmup_action<R: Rng + ?Sized>(config: &Td3Config, rng: &mut R) -> Vec<f64> {
    let b = config.action_bound;
    (0..config.action_dim)
        .map(|_| {
            let u: f64 = rng.gen();
            b * (2.0 * u - 1.0)
        })
        .collect()
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// TD3 learner. Networks compute in `T`; states, actions and rewards cross
/// the interface as `f64`.
#[derive(Debug, Clone)]
pub struct Td3Agent<T: Scalar = Real> {
    pub config: Td3Config,
    pub actor: Mlp<T>,
    pub critic1: Mlp<T>,
    pub critic2: Mlp<T>,
    pub actor_target: Mlp<T>,
    pub critic1_target: Mlp<T>,
    pub critic2_target: Mlp<T>,
    pub actor_opt: Optimizer<T>,
    pub critic1_opt: Optimizer<T>,
    pub critic2_opt: Optimizer<T>,
    pub replay: ReplayBuffer,
    /// Environment steps taken so far.
    pub env_steps: u64,
    /// Training iterations (critic updates) performed so far.
    pub train_iterations: u64,
}

impl<T: Scalar> Td3Agent<T> {
    /// Builds the six networks from `seed`; target networks start as exact
    /// copies of their online counterparts.
    pub fn new(config: Td3Config, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let actor = Mlp::new(
            &config.actor_sizes(),
            OutputActivation::ScaledTanh(config.action_bound),
            derive_seed(seed, stream::ACTOR_INIT),
        )?;
        let critic_sizes = config.critic_sizes();
        let critic1 = Mlp::new(
            &critic_sizes,
            OutputActivation::Identity,
            derive_seed(seed, stream::CRITIC1_INIT),
        )?;
        let critic2 = Mlp::new(
            &critic_sizes,
            OutputActivation::Identity,
            derive_seed(seed, stream::CRITIC2_INIT),
        )?;
        Ok(Self {
            actor_opt: Optimizer::adam(&actor, config.actor_lr),
            critic1_opt: Optimizer::adamw(&critic1, config.critic_lr, config.critic_weight_decay),
            critic2_opt: Optimizer::adamw(&critic2, config.critic_lr, config.critic_weight_decay),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            replay: ReplayBuffer::new(config.replay_capacity),
            config,
            env_steps: 0,
            train_iterations: 0,
        })
    }

    fn check_state(&self, state: &[f64]) -> Result<(), AgentError> {
        if state.len() != self.config.state_dim {
            return Err(AgentError::DimensionMismatch {
                what: "state",
                expected: self.config.state_dim,
                actual: state.len(),
            });
        }
        Ok(())
    }

    /// Deterministic policy output `pi(s)`.
    pub fn policy(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_state(state)?;
        let x: Vec<T> = state.iter().map(|&v| T::cast(v)).collect();
        Ok(self.actor.forward(&x)?.into_iter().map(T::as_f64).collect())
    }

    /// `clip(pi(s) + N(0, (explore_sigma * bound)^2))`.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>, AgentError> {
        let b = self.config.action_bound;
        let sigma = self.config.explore_sigma * b;
        let mut a = self.policy(state)?;
        for v in &mut a {
            *v = (*v + sigma * normal(rng)).clamp(-b, b);
        }
        Ok(a)
    }

    fn critic_input<'a>(states: ArrayView2<'a, T>, actions: ArrayView2<'a, T>) -> Array2<T> {
        concatenate(Axis(1), &[states, actions]).expect("batch rows agree")
    }

    /// Clipped double-Q targets computed from the target networks only.
    pub fn compute_td_target<R: Rng + ?Sized>(&self, batch: &Batch<T>, rng: &mut R) -> Array1<T> {
        let b = self.config.action_bound;
        let sigma = self.config.smooth_sigma * b;
        let clip = self.config.smooth_clip * b;
        let mut next_actions = self.actor_target.predict_batch(batch.next_states.view());
        let tb = T::cast(b);
        next_actions.mapv_inplace(|a| {
            let noise = T::cast((sigma * normal(rng)).clamp(-clip, clip));
            (a + noise).max(-tb).min(tb)
        });
        let sa = Self::critic_input(batch.next_states.view(), next_actions.view());
        let q1 = self.critic1_target.predict_batch(sa.view());
        let q2 = self.critic2_target.predict_batch(sa.view());
        let gamma = T::cast(self.config.discount);
        let mut y = batch.rewards.clone();
        Zip::from(&mut y)
            .and(&batch.dones)
            .and(q1.column(0))
            .and(q2.column(0))
            .for_each(|y, &done, &q1, &q2| *y += gamma * (T::one() - done) * q1.min(q2));
        y
    }

    /// Mean squared TD error of one critic and its parameter gradient.
    pub fn critic_loss_and_grad(
        critic: &Mlp<T>,
        batch: &Batch<T>,
        y: &Array1<T>,
    ) -> (f64, Gradients<T>) {
        let sa = Self::critic_input(batch.states.view(), batch.actions.view());
        let cache = critic.forward_batch(sa.view());
        let n = T::cast(batch.len() as f64);
        let diff = &cache.output().column(0) - y;
        let loss = diff.dot(&diff) / n;
        let two = T::cast(2.0);
        let upstream = diff.mapv(|d| two * d / n).insert_axis(Axis(1));
        let (grads, _) = critic.backward_batch(&cache, upstream.view(), true, false);
        (loss.as_f64(), grads.expect("requested"))
    }

    /// Returns the pre-step losses of both critics.
    pub fn update_critics(
        &mut self,
        batch: &Batch<T>,
        y: &Array1<T>,
    ) -> Result<(f64, f64), AgentError> {
        let (l1, g1) = Self::critic_loss_and_grad(&self.critic1, batch, y);
        let (l2, g2) = Self::critic_loss_and_grad(&self.critic2, batch, y);
        for (what, value) in [("critic 1 loss", l1), ("critic 2 loss", l2)] {
            if !value.is_finite() {
                return Err(AgentError::NonFinite {
                    what,
                    value,
                    iteration: self.train_iterations,
                });
            }
        }
        self.critic1_opt.step(&mut self.critic1, &g1)?;
        self.critic2_opt.step(&mut self.critic2, &g2)?;
        Ok((l1, l2))
    }

    /// `mean Q1(s, pi(s))` and the actor-parameter gradient of its negation.
    pub fn actor_objective_and_grad(&self, batch: &Batch<T>) -> (f64, Gradients<T>) {
        let actor_cache = self.actor.forward_batch(batch.states.view());
        let sa = Self::critic_input(batch.states.view(), actor_cache.output().view());
        let critic_cache = self.critic1.forward_batch(sa.view());
        let n = T::cast(batch.len() as f64);
        let objective = (critic_cache.output().column(0).sum() / n).as_f64();
        let upstream = Array2::from_elem((batch.len(), 1), -T::one() / n);
        let (_, d_sa) = self
            .critic1
            .backward_batch(&critic_cache, upstream.view(), false, true);
        let d_sa = d_sa.expect("requested");
        let d_action = d_sa.slice(s![.., self.config.state_dim..]);
        let (grads, _) = self
            .actor
            .backward_batch(&actor_cache, d_action, true, false);
        (objective, grads.expect("requested"))
    }

    /// Delayed branch: runs only when `train_iterations % policy_delay == 0`.
    pub fn update_actor_and_targets(
        &mut self,
        batch: &Batch<T>,
    ) -> Result<Option<f64>, AgentError> {
        if self.train_iterations % self.config.policy_delay != 0 {
            return Ok(None);
        }
        let (objective, grads) = self.actor_objective_and_grad(batch);
        if !objective.is_finite() {
            return Err(AgentError::NonFinite {
                what: "actor objective",
                value: objective,
                iteration: self.train_iterations,
            });
        }
        self.actor_opt.step(&mut self.actor, &grads)?;
        let tau = self.config.tau;
        soft_update(&mut self.critic1_target, &self.critic1, tau)?;
        soft_update(&mut self.critic2_target, &self.critic2, tau)?;
        soft_update(&mut self.actor_target, &self.actor, tau)?;
        Ok(Some(objective))
    }

    /// One training iteration on a freshly sampled mini-batch.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<TrainReport, AgentError> {
        self.train_iterations += 1;
        let batch = self.replay.sample(self.config.batch_size, rng);
        let y = self.compute_td_target(&batch, rng);
        let critic_losses = self.update_critics(&batch, &y)?;
        let actor_objective = self.update_actor_and_targets(&batch)?;
        Ok(TrainReport {
            critic_losses,
            actor_objective,
        })
    }

    /// One environment step of the training loop: act, observe, score novelty,
    /// store the transition and, once warmup is over, train.
    pub fn agent_step(
        &mut self,
        hook: NoveltyHook<'_>,
        runner: &mut EnvRunner,
        rngs: &mut AgentRngs,
    ) -> Result<StepReport, AgentError> {
        let state = runner.observation().to_vec();
        let learning = self.env_steps >= self.config.warmup_steps;
        let action = if learning {
            self.select_action(&state, &mut rngs.actions)?
        } else {
            warmup_action(&self.config, &mut rngs.actions)
        };
        let out = runner.env.step(&action)?;

        let (bonus, novel) = match hook {
            NoveltyHook::Off => (0.0, false),
            NoveltyHook::Reward(det) => {
                let before = det.novel_count();
                let bonus = det.record_state(&out.observation)?;
                (bonus, det.novel_count() > before)
            }
            NoveltyHook::Observe(det) => {
                let before = det.novel_count();
                det.record_state(&out.observation)?;
                (0.0, det.novel_count() > before)
            }
        };

        self.replay.push(Transition {
            state,
            action,
            reward: out.reward + bonus,
            next_state: out.observation.clone(),
            done: out.terminated,
        });
        runner.advance(&out);
        self.env_steps += 1;

        let train = if learning {
            Some(self.train_step(&mut rngs.training)?)
        } else {
            None
        };
        Ok(StepReport {
            env_reward: out.reward,
            bonus,
            novel,
            done: out.done(),
            train,
        })
    }

    /// Mean undiscounted return of the noise-free policy over `episodes`
    /// episodes, each reset with a seed drawn from `rng`. Episodes run in
    /// lockstep on clones of `env`; nothing in the agent changes.
    pub fn evaluate<R: RngCore + ?Sized>(
        &self,
        env: &dyn Environment,
        episodes: usize,
        rng: &mut R,
    ) -> Result<f64, AgentError> {
        assert!(episodes >= 1, "evaluate needs at least one episode");
        let mut envs: Vec<Box<dyn Environment>> =
            (0..episodes).map(|_| env.boxed_clone()).collect();
        let mut obs: Vec<Vec<f64>> = envs.iter_mut().map(|e| e.reset(rng.next_u64())).collect();
        let mut returns = vec![0.0; episodes];
        let mut active: Vec<usize> = (0..episodes).collect();
        let sdim = self.config.state_dim;
        while !active.is_empty() {
            let mut states = Array2::zeros((active.len(), sdim));
            for (row, &i) in active.iter().enumerate() {
                self.check_state(&obs[i])?;
                for (dst, &v) in states.row_mut(row).iter_mut().zip(&obs[i]) {
                    *dst = T::cast(v);
                }
            }
            let actions = self.actor.predict_batch(states.view());
            let mut still = Vec::with_capacity(active.len());
            for (row, &i) in active.iter().enumerate() {
                let a: Vec<f64> = actions.row(row).iter().map(|v| v.as_f64()).collect();
                let out = envs[i].step(&a)?;
                returns[i] += out.reward;
                if !out.done() {
                    obs[i] = out.observation;
                    still.push(i);
                }
            }
            active = still;
        }
        Ok(returns.iter().sum::<f64>() / episodes as f64)
    }

    /// Fingerprints of all six networks, online first.
    pub fn fingerprints(&self) -> [u64; 6] {
        [
            self.actor.fingerprint(),
            self.critic1.fingerprint(),
            self.critic2.fingerprint(),
            self.actor_target.fingerprint(),
            self.critic1_target.fingerprint(),
            self.critic2_target.fingerprint(),
        ]
    }
}
