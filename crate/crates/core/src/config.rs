//! Run configuration: one flat INI file (`[section]` headers, `key = value`
//! lines, `#` or `;` comments) layered as built-in default < file < flag.
//!
//! Angles are stored and echoed in radians so the echo file round-trips
//! exactly; `*_deg` keys are accepted on input as a convenience.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::env::{EnvConfig, ObservationLayout, ScenarioKind, ScenarioOptions};
use crate::error::{Error, Result};
use crate::planner::SearchConfig;
use crate::sac::{EvalSetup, SacConfig, TrainConfig};

/// Settings for held-out evaluation runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Lidar noise during evaluation.
    pub noise_sigma: f64,
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            episodes: 100,
            seed: 1,
            noise_sigma: 0.0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `sac.seed` is the run seed, set through `[run] seed`.
    pub sac: SacConfig,
    /// Vehicle, sensing, reward and success settings. `env.max_steps` and the
    /// lidar noise are taken from `sac` when training.
    pub env: EnvConfig,
    pub scenario: ScenarioKind,
    pub moving_obstacles: usize,
    pub moving_speed: f64,
    pub search: SearchConfig,
    pub eval: EvalOptions,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sac: SacConfig::default(),
            env: EnvConfig::default(),
            scenario: ScenarioKind::Perpendicular,
            moving_obstacles: 0,
            moving_speed: ScenarioOptions::default().moving_speed,
            search: SearchConfig::default(),
            eval: EvalOptions::default(),
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

fn num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| Error::config(field, format!("cannot parse '{v}': {e}")))
}

fn boolean(field: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(field, format!("expected true or false, got '{v}'"))),
    }
}

impl RunConfig {
    pub fn scenario_options(&self) -> ScenarioOptions {
        ScenarioOptions {
            vehicle: self.env.vehicle,
            moving_obstacles: self.moving_obstacles,
            moving_speed: self.moving_speed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = TrainConfig::new(self.sac.clone(), self.env.clone(), self.scenario);
        t.scenario_opts = self.scenario_options();
        t
    }

    /// Evaluation setup for `kind` with the configured noise and workers.
    pub fn eval_setup(&self, kind: ScenarioKind) -> EvalSetup {
        let mut env = self.env.clone();
        env.max_steps = self.sac.max_steps;
        env.lidar.noise_sigma = self.eval.noise_sigma;
        let mut s = EvalSetup::new(kind, env);
        s.scenario = self.scenario_options();
        s.jobs = self.eval.jobs;
        s
    }

    /// Every resolved value as `(section, key, value)`, in echo order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let s = &self.sac;
        let e = &self.env;
        let v = &e.vehicle;
        let q = &self.search;
        let hidden = s.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("run", "seed", s.seed.to_string()),
            ("run", "out_dir", self.out_dir.display().to_string()),
            ("sac", "episodes", s.episodes.to_string()),
            ("sac", "timesteps", s.max_steps.to_string()),
            ("sac", "batch", s.batch_size.to_string()),
            ("sac", "gamma", s.gamma.to_string()),
            ("sac", "noise_sigma", s.noise_sigma.to_string()),
            ("sac", "tau", s.tau.to_string()),
            ("sac", "lr", s.lr.to_string()),
            ("sac", "buffer_capacity", s.buffer_capacity.to_string()),
            ("sac", "warmup_steps", s.warmup_steps.to_string()),
            ("sac", "updates_per_env_step", s.updates_per_env_step.to_string()),
            ("sac", "target_entropy", s.target_entropy.to_string()),
            ("sac", "initial_alpha", s.initial_alpha.to_string()),
            ("sac", "hidden", hidden),
            ("sac", "checkpoint_every", s.checkpoint_every.to_string()),
            ("sac", "eval_every", s.eval_every.to_string()),
            ("sac", "eval_episodes", s.eval_episodes.to_string()),
            ("sac", "stop_success_rate", s.stop_success_rate.to_string()),
            ("sac", "stop_collision_rate", s.stop_collision_rate.to_string()),
            ("scenario", "kind", self.scenario.to_string()),
            ("scenario", "moving_obstacles", self.moving_obstacles.to_string()),
            ("scenario", "moving_speed", self.moving_speed.to_string()),
            ("vehicle", "wheelbase", v.wheelbase.to_string()),
            ("vehicle", "body_length", v.body_length.to_string()),
            ("vehicle", "body_width", v.body_width.to_string()),
            ("vehicle", "max_steer", v.max_steer.to_string()),
            ("vehicle", "max_accel", v.max_accel.to_string()),
            ("vehicle", "max_speed", v.max_speed.to_string()),
            ("env", "dt", e.dt.to_string()),
            (
                "env",
                "observation",
                match e.layout {
                    ObservationLayout::EgoGoal => "ego_goal",
                    ObservationLayout::RawState => "raw_state",
                }
                .to_string(),
            ),
            ("env", "include_grid", e.include_grid.to_string()),
            ("lidar", "rays", e.lidar.n_rays.to_string()),
            ("lidar", "max_range", e.lidar.max_range.to_string()),
            ("grid", "resolution", e.grid.resolution.to_string()),
            ("grid", "width", e.grid.width.to_string()),
            ("grid", "height", e.grid.height.to_string()),
            ("reward", "distance", e.weights.distance.to_string()),
            ("reward", "heading", e.weights.heading.to_string()),
            ("reward", "collision", e.weights.collision.to_string()),
            ("reward", "time", e.weights.time.to_string()),
            ("success", "pos_tol", e.tolerance.pos_tol.to_string()),
            ("success", "ang_tol", e.tolerance.ang_tol.to_string()),
            ("success", "speed_tol", e.tolerance.speed_tol.to_string()),
            ("success", "spot_margin", e.tolerance.spot_margin.to_string()),
            ("search", "xy_resolution", q.xy_resolution.to_string()),
            ("search", "heading_bins", q.heading_bins.to_string()),
            ("search", "arc_length", q.arc_length.to_string()),
            ("search", "allow_reverse", q.allow_reverse.to_string()),
            ("search", "reverse_penalty", q.reverse_penalty.to_string()),
            ("search", "switch_penalty", q.switch_penalty.to_string()),
            ("search", "steer_penalty", q.steer_penalty.to_string()),
            ("search", "goal_pos_tol", q.goal_pos_tol.to_string()),
            ("search", "goal_ang_tol", q.goal_ang_tol.to_string()),
            ("search", "max_expansions", q.max_expansions.to_string()),
            ("search", "check_spacing", q.check_spacing.to_string()),
            ("eval", "episodes", self.eval.episodes.to_string()),
            ("eval", "seed", self.eval.seed.to_string()),
            ("eval", "noise_sigma", self.eval.noise_sigma.to_string()),
            ("eval", "jobs", self.eval.jobs.to_string()),
        ]
    }

    /// Set one value. Errors name the `section.key` field.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let field = format!("{section}.{key}");
        let f = field.as_str();
        let value = value.trim();
        let deg = |v: &str| -> Result<f64> { Ok(num::<f64>(f, v)?.to_radians()) };
        let s = &mut self.sac;
        let e = &mut self.env;
        let q = &mut self.search;
        match (section, key) {
            ("run", "seed") => s.seed = num(f, value)?,
            ("run", "out_dir") => self.out_dir = PathBuf::from(value),
            ("sac", "episodes") => s.episodes = num(f, value)?,
            ("sac", "timesteps") => s.max_steps = num(f, value)?,
            ("sac", "batch") => s.batch_size = num(f, value)?,
            ("sac", "gamma") => s.gamma = num(f, value)?,
            ("sac", "noise_sigma") => s.noise_sigma = num(f, value)?,
            ("sac", "tau") => s.tau = num(f, value)?,
            ("sac", "lr") => s.lr = num(f, value)?,
            ("sac", "buffer_capacity") => s.buffer_capacity = num(f, value)?,
            ("sac", "warmup_steps") => s.warmup_steps = num(f, value)?,
            ("sac", "updates_per_env_step") => s.updates_per_env_step = num(f, value)?,
            ("sac", "target_entropy") => s.target_entropy = num(f, value)?,
            ("sac", "initial_alpha") => s.initial_alpha = num(f, value)?,
            ("sac", "hidden") => {
                s.hidden = value
                    .split(',')
                    .map(|h| num::<usize>(f, h))
                    .collect::<Result<_>>()?
            }
            ("sac", "checkpoint_every") => s.checkpoint_every = num(f, value)?,
            ("sac", "eval_every") => s.eval_every = num(f, value)?,
            ("sac", "eval_episodes") => s.eval_episodes = num(f, value)?,
            ("sac", "stop_success_rate") => s.stop_success_rate = num(f, value)?,
            ("sac", "stop_collision_rate") => s.stop_collision_rate = num(f, value)?,
            ("scenario", "kind") => self.scenario = value.parse().map_err(|e: crate::env::EnvError| Error::config(f, e.to_string()))?,
            ("scenario", "moving_obstacles") => self.moving_obstacles = num(f, value)?,
            ("scenario", "moving_speed") => self.moving_speed = num(f, value)?,
            ("vehicle", "wheelbase") => e.vehicle.wheelbase = num(f, value)?,
            ("vehicle", "body_length") => e.vehicle.body_length = num(f, value)?,
            ("vehicle", "body_width") => e.vehicle.body_width = num(f, value)?,
            ("vehicle", "max_steer") => e.vehicle.max_steer = num(f, value)?,
            ("vehicle", "max_steer_deg") => e.vehicle.max_steer = deg(value)?,
            ("vehicle", "max_accel") => e.vehicle.max_accel = num(f, value)?,
            ("vehicle", "max_speed") => e.vehicle.max_speed = num(f, value)?,
            ("env", "dt") => e.dt = num(f, value)?,
            ("env", "observation") => {
                e.layout = match value {
                    "ego_goal" => ObservationLayout::EgoGoal,
                    "raw_state" => ObservationLayout::RawState,
                    _ => return Err(Error::config(f, format!("expected ego_goal or raw_state, got '{value}'"))),
                }
            }
            ("env", "include_grid") => e.include_grid = boolean(f, value)?,
            ("lidar", "rays") => e.lidar.n_rays = num(f, value)?,
            ("lidar", "max_range") => e.lidar.max_range = num(f, value)?,
            ("grid", "resolution") => e.grid.resolution = num(f, value)?,
            ("grid", "width") => e.grid.width = num(f, value)?,
            ("grid", "height") => e.grid.height = num(f, value)?,
            ("reward", "distance") => e.weights.distance = num(f, value)?,
            ("reward", "heading") => e.weights.heading = num(f, value)?,
            ("reward", "collision") => e.weights.collision = num(f, value)?,
            ("reward", "time") => e.weights.time = num(f, value)?,
            ("success", "pos_tol") => e.tolerance.pos_tol = num(f, value)?,
            ("success", "ang_tol") => e.tolerance.ang_tol = num(f, value)?,
            ("success", "ang_tol_deg") => e.tolerance.ang_tol = deg(value)?,
            ("success", "speed_tol") => e.tolerance.speed_tol = num(f, value)?,
            ("success", "spot_margin") => e.tolerance.spot_margin = num(f, value)?,
            ("search", "xy_resolution") => q.xy_resolution = num(f, value)?,
            ("search", "heading_bins") => q.heading_bins = num(f, value)?,
            ("search", "arc_length") => q.arc_length = num(f, value)?,
            ("search", "allow_reverse") => q.allow_reverse = boolean(f, value)?,
            ("search", "reverse_penalty") => q.reverse_penalty = num(f, value)?,
            ("search", "switch_penalty") => q.switch_penalty = num(f, value)?,
            ("search", "steer_penalty") => q.steer_penalty = num(f, value)?,
            ("search", "goal_pos_tol") => q.goal_pos_tol = num(f, value)?,
            ("search", "goal_ang_tol") => q.goal_ang_tol = num(f, value)?,
            ("search", "goal_ang_tol_deg") => q.goal_ang_tol = deg(value)?,
            ("search", "max_expansions") => q.max_expansions = num(f, value)?,
            ("search", "check_spacing") => q.check_spacing = num(f, value)?,
            ("eval", "episodes") => self.eval.episodes = num(f, value)?,
            ("eval", "seed") => self.eval.seed = num(f, value)?,
            ("eval", "noise_sigma") => self.eval.noise_sigma = num(f, value)?,
            ("eval", "jobs") => self.eval.jobs = num(f, value)?,
            _ => return Err(Error::config(f, "unknown setting")),
        }
        Ok(())
    }

    /// Apply a `section.key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (lhs, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like section.key=value"))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::config(lhs.trim(), "override key must look like section.key"))?;
        self.set(section, key, value)
    }

    /// Apply an INI document on top of the current values.
    pub fn apply_ini(&mut self, text: &str) -> Result<()> {
        let mut section = String::from("run");
        for (i, raw) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigSyntax {
                    line: line_no,
                    msg: format!("unterminated section header '{line}'"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(&section, k.trim(), v)?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_ini(&text)
    }

    /// Check every section; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.sac
            .validate()
            .map_err(|(field, msg)| Error::config(format!("sac.{field}"), msg))?;
        self.env.validate().map_err(|e| Error::config("env", e.to_string()))?;
        self.search.validate().map_err(|e| Error::config("search", e.to_string()))?;
        if !(self.moving_speed >= 0.0 && self.moving_speed.is_finite()) {
            return Err(Error::config("scenario.moving_speed", "must be non-negative"));
        }
        if self.eval.episodes == 0 {
            return Err(Error::config("eval.episodes", "must be at least 1"));
        }
        if self.eval.jobs == 0 {
            return Err(Error::config("eval.jobs", "must be at least 1"));
        }
        if !(self.eval.noise_sigma >= 0.0) {
            return Err(Error::config("eval.noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// The resolved configuration as an INI document.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Echo lines in `section.key = value` form, as stored in checkpoints.
    /// Every setting as `section.key = value`, except the output directory:
    /// a checkpoint should not depend on where it was written.
    pub fn echo_lines(&self) -> Vec<String> {
        self.entries()
            .into_iter()
            .filter(|(s, k, _)| !(*s == "run" && *k == "out_dir"))
            .map(|(s, k, v)| format!("{s}.{k} = {v}"))
            .collect()
    }

    /// Rebuild from checkpoint echo lines.
    pub fn from_echo_lines(lines: &[String]) -> Result<Self> {
        let mut c = RunConfig::default();
        for l in lines {
            c.set_override(l)?;
        }
        Ok(c)
    }
}
