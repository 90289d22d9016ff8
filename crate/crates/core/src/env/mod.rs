//! Episodic parking environment: reset/step, observations, reward and
//! termination over the layouts produced by [`make_scenario`].

mod scenario;
mod trajectory;

use std::f64::consts::PI;

pub use scenario::{
    make_scenario, make_scenario_with, MovingObstacle, ScenarioKind, ScenarioOptions, ScenarioSpec,
    StartSampler, LOT_HALF_SIZE, SPOT_HALF_EXTENTS,
};
pub use trajectory::{read_trajectory_csv, write_trajectory_csv, TrajectoryRow, TRAJECTORY_HEADER};

use crate::seeding::{rng_for, DetRng, Stream};
use crate::sim::{
    lidar_scan, normalize_angle, rasterize_grid, step_kinematics, ControlInput, GridConfig,
    LidarConfig, OrientedRect, Pose, VehicleParams, VehicleState,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("unknown scenario kind '{0}' (expected parallel, perpendicular or mixed)")]
    UnknownScenario(String),
    #[error("no collision-free start found for {kind} scenario with seed {seed}")]
    NoFreeStart { kind: ScenarioKind, seed: u64 },
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
    #[error("action {0:?} outside the vehicle's control bounds")]
    InvalidAction(ControlInput),
    #[error("invalid environment config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub distance: f64,
    pub heading: f64,
    pub collision: f64,
    pub time: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            distance: 1.0,
            heading: 0.5,
            collision: 100.0,
            time: 0.01,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        for (name, w) in [
            ("w1", self.distance),
            ("w2", self.heading),
            ("w3", self.collision),
            ("w4", self.time),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(format!("reward weight {name} must be non-negative, got {w}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessTolerance {
    pub pos_tol: f64,
    pub ang_tol: f64,
    pub speed_tol: f64,
    /// How far the footprint may overhang the target spot's outline.
    pub spot_margin: f64,
}

impl Default for SuccessTolerance {
    fn default() -> Self {
        Self {
            pos_tol: 0.3,
            ang_tol: 10f64.to_radians(),
            speed_tol: 0.1,
            spot_margin: 0.3,
        }
    }
}

/// `R = -w1*dist - w2*|dtheta| - w3*collision - w4`.
pub fn compute_reward(new_state: &VehicleState, goal: &Pose, collision: bool, w: &RewardWeights) -> f64 {
    let dist = new_state.pose.distance(goal);
    let dtheta = new_state.pose.heading_error(goal);
    let mut r = -w.distance * dist - w.heading * dtheta - w.time;
    if collision {
        r -= w.collision;
    }
    r
}

/// Parked: close to the spot center, aligned with the spot heading, nearly
/// stopped, and with the whole footprint inside the spot grown by
/// `spot_margin`.
pub fn check_success(
    state: &VehicleState,
    target: &OrientedRect,
    tol: &SuccessTolerance,
    params: &VehicleParams,
) -> bool {
    let goal = Pose::new(target.center.0, target.center.1, target.heading);
    if state.pose.distance(&goal) > tol.pos_tol
        || state.pose.heading_error(&goal) > tol.ang_tol
        || state.v.abs() > tol.speed_tol
    {
        return false;
    }
    let zone = target.inflated(tol.spot_margin);
    state.footprint(params).corners().iter().all(|&c| zone.contains_point(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationLayout {
    /// Goal offset in the vehicle frame and sin/cos of the heading error.
    EgoGoal,
    /// Absolute `x, y` and sin/cos of the absolute heading.
    RawState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub vehicle: VehicleParams,
    pub lidar: LidarConfig,
    pub grid: GridConfig,
    pub include_grid: bool,
    pub layout: ObservationLayout,
    pub weights: RewardWeights,
    pub tolerance: SuccessTolerance,
    pub dt: f64,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            lidar: LidarConfig::default(),
            grid: GridConfig::default(),
            include_grid: false,
            layout: ObservationLayout::EgoGoal,
            weights: RewardWeights::default(),
            tolerance: SuccessTolerance::default(),
            dt: 0.1,
            max_steps: 1000,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.vehicle.validate().map_err(EnvError::Config)?;
        self.lidar.validate().map_err(EnvError::Config)?;
        self.weights.validate().map_err(EnvError::Config)?;
        let t = &self.tolerance;
        if !(t.pos_tol > 0.0 && t.ang_tol > 0.0 && t.speed_tol > 0.0 && t.spot_margin >= 0.0) {
            return Err(EnvError::Config("success tolerances must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(EnvError::Config("dt must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(EnvError::Config("max_steps must be at least 1".into()));
        }
        if self.include_grid && !(self.grid.resolution > 0.0 && self.grid.width > 0 && self.grid.height > 0) {
            return Err(EnvError::Config("grid dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        let grid = if self.include_grid {
            self.grid.width * self.grid.height
        } else {
            0
        };
        5 + self.lidar.n_rays + grid
    }

    /// Per-step reward interval: every reward lies in `[lower, 0]`.
    pub fn reward_lower_bound(&self, lot: &OrientedRect) -> f64 {
        let diag = 2.0 * lot.half_extents.0.hypot(lot.half_extents.1);
        let w = &self.weights;
        -(w.distance * diag + w.heading * PI + w.collision + w.time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub collision: bool,
    pub success: bool,
    pub timeout: bool,
    pub dist: f64,
    pub dtheta: f64,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

impl StepResult {
    /// Episode ended for a reason inherent to the task (not the step cap),
    /// so bootstrapping past this transition is wrong.
    pub fn terminal(&self) -> bool {
        self.info.collision || self.info.success
    }
}

/// Single-owner episode state over one scenario.
#[derive(Debug, Clone)]
pub struct ParkingEnv {
    spec: ScenarioSpec,
    cfg: EnvConfig,
    state: VehicleState,
    moving: Vec<MovingObstacle>,
    t: usize,
    done: bool,
    started: bool,
    sensor_rng: DetRng,
}

impl ParkingEnv {
    pub fn new(spec: ScenarioSpec, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let moving = spec.moving.clone();
        Ok(Self {
            spec,
            cfg,
            state: VehicleState::default(),
            moving,
            t: 0,
            done: false,
            started: false,
            sensor_rng: rng_for(0, Stream::Sensor, 0),
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
    }

    /// Static plus moving obstacles at the current time.
    pub fn obstacles_now(&self) -> Vec<OrientedRect> {
        let mut all = self.spec.obstacles.clone();
        all.extend(self.moving.iter().map(|m| m.rect));
        all
    }

    /// Start an episode from a sampled collision-free pose at rest.
    pub fn reset(&mut self, episode_seed: u64) -> Result<Vec<f64>, EnvError> {
        let start = self.spec.sample_start(episode_seed, &self.cfg.vehicle)?;
        Ok(self.reset_to(start, episode_seed))
    }

    /// Start an episode from an explicit state.
    pub fn reset_to(&mut self, state: VehicleState, episode_seed: u64) -> Vec<f64> {
        self.state = state;
        self.moving = self.spec.moving.clone();
        self.t = 0;
        self.done = false;
        self.started = true;
        self.sensor_rng = rng_for(self.spec.seed ^ episode_seed.rotate_left(29), Stream::Sensor, episode_seed);
        self.observe()
    }

    pub fn step(&mut self, action: ControlInput) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if !(action.steer.is_finite() && action.throttle.is_finite()) || !action.within(&self.cfg.vehicle) {
            return Err(EnvError::InvalidAction(action));
        }
        self.state = step_kinematics(&self.state, &action, &self.cfg.vehicle, self.cfg.dt);
        let lot = self.spec.lot;
        for m in &mut self.moving {
            m.advance(&lot, self.cfg.dt);
        }
        self.t += 1;

        let obstacles = self.obstacles_now();
        let collision = self.spec.footprint_collides(&self.state, &self.cfg.vehicle, &obstacles);
        let success =
            !collision && check_success(&self.state, &self.spec.target, &self.cfg.tolerance, &self.cfg.vehicle);
        let goal = self.spec.goal();
        let reward = compute_reward(&self.state, &goal, collision, &self.cfg.weights);
        let timeout = self.t >= self.cfg.max_steps;
        self.done = collision || success || timeout;
        let obs = self.observe();
        Ok(StepResult {
            obs,
            reward,
            done: self.done,
            info: StepInfo {
                collision,
                success,
                timeout,
                dist: self.state.pose.distance(&goal),
                dtheta: self.state.pose.heading_error(&goal),
                t: self.t,
            },
        })
    }

    /// Observation of the current state. Consumes one noise draw per lidar
    /// ray from the episode's sensor stream.
    pub fn observe(&mut self) -> Vec<f64> {
        let obstacles = self.obstacles_now();
        let scan = lidar_scan(&self.state, &obstacles, &self.spec.lot, &self.cfg.lidar, &mut self.sensor_rng);
        let mut obs = Vec::with_capacity(self.cfg.obs_dim());
        let pose = self.state.pose;
        match self.cfg.layout {
            ObservationLayout::EgoGoal => {
                let goal = self.spec.goal();
                let (s, c) = pose.theta.sin_cos();
                let (dx, dy) = (goal.x - pose.x, goal.y - pose.y);
                let dtheta = normalize_angle(goal.theta - pose.theta);
                obs.extend_from_slice(&[
                    (c * dx + s * dy) / 10.0,
                    (-s * dx + c * dy) / 10.0,
                    dtheta.sin(),
                    dtheta.cos(),
                ]);
            }
            ObservationLayout::RawState => {
                obs.extend_from_slice(&[pose.x / 10.0, pose.y / 10.0, pose.theta.sin(), pose.theta.cos()]);
            }
        }
        obs.push(self.state.v / self.cfg.vehicle.max_speed);
        obs.extend(scan.iter().map(|r| r / self.cfg.lidar.max_range));
        if self.cfg.include_grid {
            let grid = rasterize_grid(&self.state, &obstacles, &self.spec.lot, &self.cfg.grid);
            obs.extend(grid.cells.iter().map(|&c| c as f64));
        }
        obs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn w() -> RewardWeights {
        RewardWeights {
            distance: 1.0,
            heading: 0.5,
            collision: 100.0,
            time: 0.01,
        }
    }

    #[test]
    fn reward_examples() {
        let goal = Pose::new(1.0, 2.0, 0.3);
        let at_goal = VehicleState::at_rest(goal);
        assert!((compute_reward(&at_goal, &goal, false, &w()) + 0.01).abs() < 1e-15);
        let off = VehicleState::at_rest(Pose::new(1.0, 4.0, 0.3 + FRAC_PI_2));
        let r = compute_reward(&off, &goal, false, &w());
        assert!((r + 2.795_398_163_397_448).abs() < 1e-12, "{r}");
        let rc = compute_reward(&off, &goal, true, &w());
        assert!((rc - (r - 100.0)).abs() < 1e-12);
    }

    #[test]
    fn success_thresholds() {
        let p = VehicleParams::default();
        let tol = SuccessTolerance::default();
        let target = OrientedRect::new((0.0, 0.0), SPOT_HALF_EXTENTS, FRAC_PI_2);
        let at = VehicleState::at_rest(Pose::new(0.0, 0.0, FRAC_PI_2));
        assert!(check_success(&at, &target, &tol, &p));
        let beyond = VehicleState::at_rest(Pose::new(0.0, tol.pos_tol + 1e-9, FRAC_PI_2));
        assert!(!check_success(&beyond, &target, &tol, &p));
        let moving = VehicleState {
            v: 0.11,
            ..at
        };
        assert!(!check_success(&moving, &target, &tol, &p));
        let reversed = VehicleState::at_rest(Pose::new(0.0, 0.0, -FRAC_PI_2));
        assert!(!check_success(&reversed, &target, &tol, &p));
    }

    fn empty_spec() -> ScenarioSpec {
        ScenarioSpec {
            kind: ScenarioKind::Mixed,
            seed: 0,
            lot: OrientedRect::new((0.0, 0.0), (10.0, 10.0), 0.0),
            target: OrientedRect::new((0.0, 0.0), SPOT_HALF_EXTENTS, 0.0),
            obstacles: vec![],
            moving: vec![],
            start: StartSampler {
                x: (-3.0, -2.0),
                y: (-1.0, 1.0),
                theta: (-0.1, 0.1),
            },
        }
    }

    #[test]
    fn observation_at_goal_in_empty_lot() {
        let cfg = EnvConfig {
            lidar: LidarConfig {
                noise_sigma: 0.0,
                ..LidarConfig::default()
            },
            ..EnvConfig::default()
        };
        let mut env = ParkingEnv::new(empty_spec(), cfg).unwrap();
        let obs = env.reset_to(VehicleState::at_rest(Pose::new(0.0, 0.0, 0.0)), 0);
        assert_eq!(obs.len(), 21);
        assert_eq!(&obs[..5], &[0.0, 0.0, 0.0, 1.0, 0.0]);
        // walls 10 m away along the axes, sqrt(200) clipped at max_range elsewhere
        assert!((obs[5] - 1.0).abs() < 1e-12);
        assert!((obs[9] - 1.0).abs() < 1e-12);
        assert!(obs[5..].iter().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn full_speed_normalizes_to_one() {
        let mut env = ParkingEnv::new(empty_spec(), EnvConfig::default()).unwrap();
        let state = VehicleState {
            pose: Pose::new(-2.0, 0.0, 0.0),
            v: 2.0,
        };
        let obs = env.reset_to(state, 0);
        assert_eq!(obs[4], 1.0);
    }

    #[test]
    fn idle_episode_times_out() {
        let cfg = EnvConfig {
            max_steps: 25,
            ..EnvConfig::default()
        };
        let mut env = ParkingEnv::new(empty_spec(), cfg).unwrap();
        let start = env.reset(0).unwrap();
        assert_eq!(start.len(), 21);
        let pose0 = env.state().pose;
        let mut last = None;
        for _ in 0..25 {
            last = Some(env.step(ControlInput::new(0.1, 0.0)).unwrap());
            assert_eq!(env.state().pose, pose0);
        }
        let last = last.unwrap();
        assert!(last.done && last.info.timeout && !last.terminal());
        assert_eq!(last.info.t, 25);
        assert_eq!(env.step(ControlInput::default()), Err(EnvError::EpisodeDone));
    }

    #[test]
    fn driving_into_an_obstacle_collides() {
        let mut spec = empty_spec();
        spec.obstacles.push(OrientedRect::new((2.0, 0.0), (0.5, 2.0), 0.0));
        let mut env = ParkingEnv::new(spec, EnvConfig::default()).unwrap();
        env.reset_to(VehicleState::at_rest(Pose::new(-2.0, 0.0, 0.0)), 0);
        let mut hit = None;
        for _ in 0..100 {
            let r = env.step(ControlInput::new(0.0, 1.0)).unwrap();
            if r.done {
                hit = Some(r);
                break;
            }
        }
        let hit = hit.expect("vehicle should reach the obstacle");
        assert!(hit.info.collision && !hit.info.success);
        let expected = compute_reward(env.state(), &env.spec().goal(), true, &env.config().weights);
        assert_eq!(hit.reward, expected);
        assert!(hit.reward < -100.0);
    }

    #[test]
    fn rejects_out_of_bounds_action_and_step_before_reset() {
        let mut env = ParkingEnv::new(empty_spec(), EnvConfig::default()).unwrap();
        assert_eq!(env.step(ControlInput::default()), Err(EnvError::NotReset));
        env.reset(0).unwrap();
        assert!(matches!(env.step(ControlInput::new(1.0, 0.0)), Err(EnvError::InvalidAction(_))));
    }

    #[test]
    fn reset_is_deterministic() {
        let spec = make_scenario(ScenarioKind::Perpendicular, 0).unwrap();
        let mut a = ParkingEnv::new(spec.clone(), EnvConfig::default()).unwrap();
        let mut b = ParkingEnv::new(spec, EnvConfig::default()).unwrap();
        assert_eq!(a.reset(7).unwrap(), b.reset(7).unwrap());
        assert_ne!(a.reset(8).unwrap(), b.reset(7).unwrap());
    }

    #[test]
    fn grid_extends_observation() {
        let cfg = EnvConfig {
            include_grid: true,
            ..EnvConfig::default()
        };
        let mut env = ParkingEnv::new(empty_spec(), cfg.clone()).unwrap();
        let obs = env.reset(0).unwrap();
        assert_eq!(obs.len(), 21 + 256);
        assert_eq!(obs.len(), cfg.obs_dim());
    }
}
