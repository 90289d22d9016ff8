use rand::Rng;

use super::eval::{evaluate, EvalReport, EvalSetup};
use super::{sac_update, SacConfig, TrainState, Transition};
use crate::env::{make_scenario_with, EnvConfig, ParkingEnv, ScenarioKind, ScenarioOptions, ScenarioSpec};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_for, Stream};
use crate::sim::ControlInput;

pub const METRICS_HEADER: &str =
    "episode,steps,return,success,collision,final_dist,final_dtheta,alpha,critic_loss,actor_loss";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sac: SacConfig,
    pub env: EnvConfig,
    pub scenario: ScenarioKind,
    pub scenario_opts: ScenarioOptions,
}

impl TrainConfig {
    pub fn new(sac: SacConfig, env: EnvConfig, scenario: ScenarioKind) -> Self {
        Self {
            sac,
            env,
            scenario,
            scenario_opts: ScenarioOptions::default(),
        }
    }

    /// Environment settings used while training: the step cap and lidar
    /// noise come from the SAC config.
    pub fn training_env(&self) -> EnvConfig {
        let mut env = self.env.clone();
        env.max_steps = self.sac.max_steps;
        env.lidar.noise_sigma = self.sac.noise_sigma;
        env
    }

    /// Evaluation settings: same environment with noise-free sensors.
    pub fn eval_env(&self) -> EnvConfig {
        let mut env = self.training_env();
        env.lidar.noise_sigma = 0.0;
        env
    }

    pub fn bounds(&self) -> [f64; 2] {
        [self.env.vehicle.max_steer, 1.0]
    }
}

/// One row of `metrics.csv`. Losses are means over the episode's gradient
/// rounds and NaN when there were none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub steps: usize,
    pub ret: f64,
    pub success: bool,
    pub collision: bool,
    pub final_dist: f64,
    pub final_dtheta: f64,
    pub alpha: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

impl EpisodeMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.steps,
            self.ret,
            self.success as u8,
            self.collision as u8,
            self.final_dist,
            self.final_dtheta,
            self.alpha,
            self.critic_loss,
            self.actor_loss
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub metrics: Vec<EpisodeMetrics>,
    /// Held-out evaluations run for early stopping: `(episodes done, report)`.
    pub evals: Vec<(u64, EvalReport)>,
    pub stopped_early: bool,
}

/// Layout used for training episode `episode`.
pub fn training_scenario(cfg: &TrainConfig, episode: u64) -> Result<ScenarioSpec> {
    let seed = derive_seed(cfg.sac.seed, Stream::Scenario, episode);
    Ok(make_scenario_with(cfg.scenario, seed, &cfg.scenario_opts)?)
}

fn uniform_action<R: Rng + ?Sized>(bounds: [f64; 2], rng: &mut R) -> ControlInput {
    ControlInput::new(
        rng.gen_range(-bounds[0]..=bounds[0]),
        rng.gen_range(-bounds[1]..=bounds[1]),
    )
}

/// Run (or continue) training until the episode cap or an early stop.
///
/// `on_episode` sees the state after every episode, in order; use it to
/// stream metrics or write checkpoints.
pub fn train(
    cfg: &TrainConfig,
    resume: Option<TrainState>,
    on_episode: &mut dyn FnMut(&TrainState, &EpisodeMetrics) -> Result<()>,
) -> Result<TrainOutcome> {
    let sac = &cfg.sac;
    sac.validate().map_err(|(field, msg)| Error::config(format!("sac.{field}"), msg))?;
    let env_cfg = cfg.training_env();
    env_cfg.validate()?;
    let obs_dim = env_cfg.obs_dim();
    let bounds = cfg.bounds();
    let mut state = match resume {
        Some(s) => {
            if s.policy.obs_dim() != obs_dim {
                return Err(Error::config("resume", "checkpoint observation size does not match config"));
            }
            s
        }
        None => TrainState::new(sac, obs_dim, bounds),
    };
    // updates need a full batch in the buffer
    let learn_after = sac.warmup_steps.max(sac.batch_size) as u64;

    let mut metrics = Vec::new();
    let mut evals = Vec::new();
    let mut stopped_early = false;
    while (state.episodes as usize) < sac.episodes {
        let episode = state.episodes;
        let spec = training_scenario(cfg, episode)?;
        let mut env = ParkingEnv::new(spec, env_cfg.clone())?;
        let mut obs = env.reset(episode)?;
        let mut rng = rng_for(sac.seed, Stream::Rollout, episode);
        let mut ret = 0.0;
        let (mut closs, mut aloss, mut n_updates) = (0.0, 0.0, 0usize);
        let last = loop {
            let action = if state.env_steps < learn_after {
                uniform_action(bounds, &mut rng)
            } else {
                state.policy.sample(&obs, &mut rng)?.0
            };
            let res = env.step(action)?;
            ret += res.reward;
            state.buffer.push(&Transition {
                s: obs,
                a: action,
                r: res.reward,
                s_next: res.obs.clone(),
                done: res.terminal(),
            });
            state.env_steps += 1;
            if state.env_steps >= learn_after {
                for _ in 0..sac.updates_per_env_step {
                    let st = sac_update(&mut state, sac);
                    if !(st.critic_loss.is_finite() && st.actor_loss.is_finite() && st.alpha.is_finite()) {
                        return Err(Error::NonFinite {
                            what: "loss",
                            step: state.env_steps,
                            seed: sac.seed,
                        });
                    }
                    closs += st.critic_loss;
                    aloss += st.actor_loss;
                    n_updates += 1;
                }
            }
            obs = res.obs.clone();
            if res.done {
                break res;
            }
        };
        if !state.params_finite() {
            return Err(Error::NonFinite {
                what: "parameter",
                step: state.env_steps,
                seed: sac.seed,
            });
        }
        state.episodes += 1;
        let m = EpisodeMetrics {
            episode,
            steps: last.info.t,
            ret,
            success: last.info.success,
            collision: last.info.collision,
            final_dist: last.info.dist,
            final_dtheta: last.info.dtheta,
            alpha: state.alpha(),
            critic_loss: if n_updates > 0 { closs / n_updates as f64 } else { f64::NAN },
            actor_loss: if n_updates > 0 { aloss / n_updates as f64 } else { f64::NAN },
        };
        on_episode(&state, &m)?;
        metrics.push(m);

        if sac.eval_every > 0 && state.episodes % sac.eval_every as u64 == 0 && state.env_steps >= learn_after {
            let mut setup = EvalSetup::new(cfg.scenario, cfg.eval_env());
            setup.scenario = cfg.scenario_opts;
            // validation layouts: a stream distinct from both training and the
            // default held-out evaluation seed
            let report = evaluate(&state.policy, &setup, sac.eval_episodes, derive_seed(sac.seed, Stream::Eval, u64::MAX))?;
            let good = report.success_rate >= sac.stop_success_rate && report.collision_rate <= sac.stop_collision_rate;
            evals.push((state.episodes, report));
            if good {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        state,
        metrics,
        evals,
        stopped_early,
    })
}
