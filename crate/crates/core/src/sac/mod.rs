//! Soft Actor-Critic: replay buffer, twin critics with Polyak-averaged
//! targets, reparameterized actor, adaptive temperature, and the training
//! and evaluation drivers.

mod buffer;
mod eval;
mod train;
mod update;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use eval::{
    evaluate, evaluate_with, evaluation_scenario, run_episode, Agent, DeterministicPolicy, EpisodeOutcome,
    EvalReport, EvalSetup,
};
pub use train::{
    train, training_scenario, EpisodeMetrics, TrainConfig, TrainOutcome, METRICS_HEADER,
};
pub use update::{
    actor_loss_and_grad, actor_update, critic_loss_and_grad, critic_target, critic_target_with_noise,
    critic_update, draw_noise, sample_log_probs, temperature_loss_and_grad, temperature_update, ActorLoss,
};

use crate::nn::{polyak_update, Adam, GaussianPolicy, TwinCritic, ACTION_DIM};
use crate::seeding::{rng_for, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    /// Episode cap (M).
    pub episodes: usize,
    /// Step cap per episode (T).
    pub max_steps: usize,
    /// Minibatch size (B).
    pub batch_size: usize,
    pub gamma: f64,
    /// Standard deviation of the additive lidar noise during training.
    pub noise_sigma: f64,
    /// Polyak coefficient for the target critics.
    pub tau: f64,
    pub lr: f64,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    pub updates_per_env_step: usize,
    pub target_entropy: f64,
    pub initial_alpha: f64,
    pub hidden: Vec<usize>,
    /// Write a checkpoint every this many episodes (0 disables).
    pub checkpoint_every: usize,
    /// Run a held-out evaluation every this many episodes (0 disables) and
    /// stop once both thresholds below are met.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub stop_success_rate: f64,
    pub stop_collision_rate: f64,
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            episodes: 3000,
            max_steps: 1000,
            batch_size: 128,
            gamma: 0.99,
            noise_sigma: 0.01,
            tau: 0.05,
            lr: 3e-4,
            buffer_capacity: 1_000_000,
            warmup_steps: 1000,
            updates_per_env_step: 1,
            target_entropy: -(ACTION_DIM as f64),
            initial_alpha: 0.2,
            hidden: vec![256, 256, 256],
            checkpoint_every: 100,
            eval_every: 25,
            eval_episodes: 50,
            stop_success_rate: 0.8,
            stop_collision_rate: 0.05,
            seed: 0,
        }
    }
}

impl SacConfig {
    /// Returns the offending field name and a message on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(("tau", format!("must lie in (0, 1], got {}", self.tau)));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(("batch_size", "must be positive and at most buffer_capacity".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(("lr", "must be positive".into()));
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            return Err(("initial_alpha", "must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(("noise_sigma", "must be non-negative".into()));
        }
        if self.max_steps == 0 {
            return Err(("max_steps", "must be at least 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(("hidden", "needs at least one non-empty hidden layer".into()));
        }
        if self.updates_per_env_step == 0 {
            return Err(("updates_per_env_step", "must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.stop_success_rate) || !(0.0..=1.0).contains(&self.stop_collision_rate) {
            return Err(("stop_success_rate", "stop thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything training mutates. Random streams are derived from the seed and
/// the counters, so this plus the config fully determines the continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub policy: GaussianPolicy,
    pub critics: TwinCritic,
    pub targets: TwinCritic,
    pub policy_opt: Adam,
    pub q1_opt: Adam,
    pub q2_opt: Adam,
    pub alpha_opt: Adam,
    pub log_alpha: f64,
    pub buffer: ReplayBuffer,
    pub env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
}

impl TrainState {
    pub fn new(cfg: &SacConfig, obs_dim: usize, bounds: [f64; ACTION_DIM]) -> Self {
        let mut rng = rng_for(cfg.seed, Stream::Init, 0);
        let policy = GaussianPolicy::new(obs_dim, &cfg.hidden, bounds, &mut rng);
        let critics = TwinCritic::new(obs_dim, &cfg.hidden, &mut rng);
        let targets = critics.clone();
        Self {
            policy_opt: Adam::new(policy.net.num_params()),
            q1_opt: Adam::new(critics.q1.num_params()),
            q2_opt: Adam::new(critics.q2.num_params()),
            alpha_opt: Adam::new(1),
            log_alpha: cfg.initial_alpha.ln(),
            buffer: ReplayBuffer::new(cfg.buffer_capacity, obs_dim, bounds),
            policy,
            critics,
            targets,
            env_steps: 0,
            updates: 0,
            episodes: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Move each target critic toward its online twin.
    pub fn update_targets(&mut self, tau: f64) {
        polyak_update(self.targets.q1.params_mut(), self.critics.q1.params(), tau);
        polyak_update(self.targets.q2.params_mut(), self.critics.q2.params(), tau);
    }

    pub fn params_finite(&self) -> bool {
        self.policy.net.params().iter().all(|v| v.is_finite())
            && self.critics.q1.params().iter().all(|v| v.is_finite())
            && self.critics.q2.params().iter().all(|v| v.is_finite())
            && self.log_alpha.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
}

/// One full gradient round: critics, actor, temperature, then targets.
/// Randomness comes from the stream keyed by the update counter.
pub fn sac_update(state: &mut TrainState, cfg: &SacConfig) -> UpdateStats {
    let mut rng = rng_for(cfg.seed, Stream::Update, state.updates);
    let batch = state.buffer.sample(cfg.batch_size, &mut rng);
    let (l1, l2) = critic_update(state, &batch, cfg.gamma, cfg.lr, &mut rng);
    let actor_loss = actor_update(state, &batch, cfg.lr, &mut rng);
    let alpha = temperature_update(state, &batch, cfg.target_entropy, cfg.lr, &mut rng);
    state.update_targets(cfg.tau);
    state.updates += 1;
    UpdateStats {
        critic_loss: 0.5 * (l1 + l2),
        actor_loss,
        alpha,
    }
}
