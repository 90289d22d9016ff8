use std::time::{Duration, Instant};

use crate::env::{
    make_scenario_with, EnvConfig, ParkingEnv, ScenarioKind, ScenarioOptions, ScenarioSpec, TrajectoryRow,
};
use crate::error::Result;
use crate::nn::GaussianPolicy;
use crate::seeding::{derive_seed, Stream};
use crate::sim::ControlInput;

/// Anything that can drive the vehicle for an episode.
pub trait Agent {
    fn begin_episode(&mut self, _env: &ParkingEnv) {}
    fn act(&mut self, obs: &[f64], env: &ParkingEnv) -> Result<ControlInput>;
}

/// Acts with `bound * tanh(mean)`; never samples.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicPolicy<'a>(pub &'a GaussianPolicy);

impl Agent for DeterministicPolicy<'_> {
    fn act(&mut self, obs: &[f64], _env: &ParkingEnv) -> Result<ControlInput> {
        Ok(self.0.act_deterministic(obs)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub steps: usize,
    pub ret: f64,
    pub success: bool,
    pub collision: bool,
    pub final_dist: f64,
    pub final_dtheta: f64,
    /// Wall-clock time of the whole rollout: observations, actions and
    /// simulation steps.
    pub elapsed: Duration,
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

/// Reset `env` with `episode_seed` and run `agent` until the episode ends.
pub fn run_episode<A: Agent + ?Sized>(
    env: &mut ParkingEnv,
    agent: &mut A,
    episode_seed: u64,
    record: bool,
) -> Result<EpisodeOutcome> {
    let started = Instant::now();
    let mut obs = env.reset(episode_seed)?;
    agent.begin_episode(env);
    let mut rows = Vec::new();
    let row = |env: &ParkingEnv, a: ControlInput, reward: f64, collision: bool, success: bool| {
        let s = env.state();
        TrajectoryRow {
            t: env.t(),
            x: s.pose.x,
            y: s.pose.y,
            theta: s.pose.theta,
            v: s.v,
            steer: a.steer,
            throttle: a.throttle,
            reward,
            collision,
            success,
        }
    };
    if record {
        rows.push(row(env, ControlInput::default(), 0.0, false, false));
    }
    let mut ret = 0.0;
    loop {
        let action = agent.act(&obs, env)?;
        let res = env.step(action)?;
        ret += res.reward;
        if record {
            rows.push(row(env, action, res.reward, res.info.collision, res.info.success));
        }
        obs = res.obs;
        if res.done {
            return Ok(EpisodeOutcome {
                steps: res.info.t,
                ret,
                success: res.info.success,
                collision: res.info.collision,
                final_dist: res.info.dist,
                final_dtheta: res.info.dtheta,
                elapsed: started.elapsed(),
                trajectory: record.then_some(rows),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSetup {
    pub env: EnvConfig,
    pub kind: ScenarioKind,
    pub scenario: ScenarioOptions,
    pub record_trajectories: bool,
    /// Worker threads; results do not depend on this.
    pub jobs: usize,
}

impl EvalSetup {
    pub fn new(kind: ScenarioKind, env: EnvConfig) -> Self {
        Self {
            env,
            kind,
            scenario: ScenarioOptions::default(),
            record_trajectories: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub mean_episode_steps: f64,
    pub mean_return: f64,
    pub mean_final_dist: f64,
    pub mean_inference_time_per_episode: f64,
    pub outcomes: Vec<EpisodeOutcome>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "episodes,success_rate,collision_rate,mean_episode_steps,mean_return,mean_final_dist,mean_inference_time_per_episode";

    fn aggregate(outcomes: Vec<EpisodeOutcome>) -> Self {
        let n = outcomes.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;
        Self {
            episodes: outcomes.len(),
            success_rate: mean(&|o| o.success as u8 as f64),
            collision_rate: mean(&|o| o.collision as u8 as f64),
            mean_episode_steps: mean(&|o| o.steps as f64),
            mean_return: mean(&|o| o.ret),
            mean_final_dist: mean(&|o| o.final_dist),
            mean_inference_time_per_episode: mean(&|o| o.elapsed.as_secs_f64()),
            outcomes,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.episodes,
            self.success_rate,
            self.collision_rate,
            self.mean_episode_steps,
            self.mean_return,
            self.mean_final_dist,
            self.mean_inference_time_per_episode
        )
    }

    /// Report without timing, for comparisons across runs.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.mean_inference_time_per_episode = 0.0;
        for o in &mut r.outcomes {
            o.elapsed = Duration::ZERO;
        }
        r
    }
}

/// Held-out layout `i` for evaluation seed `seed`; disjoint from the
/// training stream.
pub fn evaluation_scenario(kind: ScenarioKind, opts: &ScenarioOptions, seed: u64, i: u64) -> Result<ScenarioSpec> {
    Ok(make_scenario_with(kind, derive_seed(seed, Stream::Eval, i), opts)?)
}

/// Run `n` held-out episodes, building one agent per worker thread.
pub fn evaluate_with<A, F>(make_agent: F, setup: &EvalSetup, n: usize, seed: u64) -> Result<EvalReport>
where
    A: Agent,
    F: Fn() -> A + Sync,
{
    let run = |i: usize| -> Result<EpisodeOutcome> {
        let spec = evaluation_scenario(setup.kind, &setup.scenario, seed, i as u64)?;
        let mut env = ParkingEnv::new(spec, setup.env.clone())?;
        let mut agent = make_agent();
        run_episode(&mut env, &mut agent, i as u64, setup.record_trajectories)
    };
    let jobs = setup.jobs.clamp(1, n.max(1));
    let outcomes: Vec<EpisodeOutcome> = if jobs == 1 {
        (0..n).map(run).collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<Result<EpisodeOutcome>>> = (0..n).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunk = n.div_ceil(jobs);
            for (c, part) in slots.chunks_mut(chunk).enumerate() {
                let run = &run;
                scope.spawn(move || {
                    for (k, slot) in part.iter_mut().enumerate() {
                        *slot = Some(run(c * chunk + k));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every slot is filled")).collect::<Result<_>>()?
    };
    Ok(EvalReport::aggregate(outcomes))
}

/// Deterministic-policy evaluation over `n` held-out episodes.
pub fn evaluate(policy: &GaussianPolicy, setup: &EvalSetup, n: usize, seed: u64) -> Result<EvalReport> {
    evaluate_with(|| DeterministicPolicy(policy), setup, n, seed)
}
