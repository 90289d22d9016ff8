//! Hybrid A* over `(x, y, theta)` with fixed-length bicycle arcs, used as the
//! classical baseline. [`PathTracker`] drives a planned path through the
//! environment so both methods can be scored the same way.

mod tracker;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

pub use tracker::{PathTracker, PlannerAgent};

use crate::env::{ScenarioSpec, TrajectoryRow};
use crate::sim::{normalize_angle, step_kinematics, ControlInput, Pose, VehicleParams, VehicleState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("no path found after {expansions} expansions")]
    NoPath { expansions: usize },
    #[error("start pose is in collision")]
    StartInCollision,
    #[error("invalid planner config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub xy_resolution: f64,
    pub heading_bins: usize,
    /// Arc length of every motion primitive.
    pub arc_length: f64,
    /// Steering angles tried at every expansion; `None` means
    /// `{-max_steer, 0, +max_steer}`.
    pub steer_set: Option<Vec<f64>>,
    pub allow_reverse: bool,
    pub reverse_penalty: f64,
    pub switch_penalty: f64,
    pub steer_penalty: f64,
    pub goal_pos_tol: f64,
    pub goal_ang_tol: f64,
    pub max_expansions: usize,
    /// Spacing of collision checks along each primitive.
    pub check_spacing: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            xy_resolution: 0.5,
            heading_bins: 72,
            arc_length: 1.0,
            steer_set: None,
            allow_reverse: true,
            reverse_penalty: 1.5,
            switch_penalty: 1.0,
            steer_penalty: 0.1,
            goal_pos_tol: 0.3,
            goal_ang_tol: 10f64.to_radians(),
            max_expansions: 200_000,
            check_spacing: 0.1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let pos = [
            ("xy_resolution", self.xy_resolution),
            ("arc_length", self.arc_length),
            ("goal_pos_tol", self.goal_pos_tol),
            ("goal_ang_tol", self.goal_ang_tol),
            ("check_spacing", self.check_spacing),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlanError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.heading_bins == 0 || self.max_expansions == 0 {
            return Err(PlanError::Config("heading_bins and max_expansions must be positive".into()));
        }
        if self.reverse_penalty < 1.0 || self.switch_penalty < 0.0 || self.steer_penalty < 0.0 {
            return Err(PlanError::Config(
                "reverse_penalty must be >= 1 and the other penalties >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn steers(&self, params: &VehicleParams) -> Vec<f64> {
        self.steer_set
            .clone()
            .unwrap_or_else(|| vec![-params.max_steer, 0.0, params.max_steer])
    }
}

/// One pose of a planned path. `direction`, `steer` and `arc` describe the
/// primitive that reached this pose from the previous one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub pose: Pose,
    pub direction: Direction,
    pub steer: f64,
    pub arc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub path: Vec<PathPoint>,
    pub cost: f64,
    pub expansions: usize,
    pub planning_time: Duration,
}

impl PlanResult {
    pub fn length(&self) -> f64 {
        self.path.iter().skip(1).map(|p| p.arc).sum()
    }
}

/// Lower bound on the cost to reach `goal`: the larger of the straight-line
/// distance and the arc needed to turn through the heading difference.
pub fn heuristic(from: &Pose, goal: &Pose, params: &VehicleParams) -> f64 {
    from.distance(goal).max(params.min_turning_radius() * from.heading_error(goal))
}

/// Integrate one primitive from `start`, returning the intermediate poses at
/// no more than `spacing` apart (the last one is the end pose).
pub fn integrate_primitive(
    start: &Pose,
    direction: Direction,
    steer: f64,
    arc: f64,
    spacing: f64,
    params: &VehicleParams,
) -> Vec<Pose> {
    let n = (arc / spacing).ceil().max(1.0) as usize;
    let ds = arc / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut pose = *start;
    let u = ControlInput::new(steer, 0.0);
    for _ in 0..n {
        // unit speed, so dt equals the distance travelled
        let s = VehicleState {
            pose,
            v: direction.sign(),
        };
        pose = step_kinematics(&s, &u, params, ds).pose;
        out.push(pose);
    }
    out
}

fn primitive_cost(cfg: &SearchConfig, dir: Direction, steer: f64, prev: Option<Direction>) -> f64 {
    let mut c = cfg.arc_length;
    if dir == Direction::Reverse {
        c *= cfg.reverse_penalty;
    }
    if steer != 0.0 {
        c += cfg.steer_penalty;
    }
    if prev.is_some_and(|p| p != dir) {
        c += cfg.switch_penalty;
    }
    c
}

fn dir_scale(cfg: &SearchConfig, dir: Direction) -> f64 {
    match dir {
        Direction::Forward => 1.0,
        Direction::Reverse => cfg.reverse_penalty,
    }
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Pose, cfg: &SearchConfig) -> Cell {
    let bin = std::f64::consts::TAU / cfg.heading_bins as f64;
    let h = (normalize_angle(p.theta) / bin).round() as i64;
    (
        (p.x / cfg.xy_resolution).floor() as i64,
        (p.y / cfg.xy_resolution).floor() as i64,
        h.rem_euclid(cfg.heading_bins as i64),
    )
}

struct Node {
    point: PathPoint,
    g: f64,
    parent: Option<usize>,
}

#[derive(PartialEq)]
struct OpenEntry {
    f: f64,
    g: f64,
    seq: usize,
    node: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // reversed so the max-heap pops the smallest (f, g, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.g.total_cmp(&self.g))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn at_goal(p: &Pose, goal: &Pose, cfg: &SearchConfig) -> bool {
    p.distance(goal) <= cfg.goal_pos_tol && p.heading_error(goal) <= cfg.goal_ang_tol
}

/// Search from `start` to the scenario's goal pose among its static obstacles.
/// Ties in the open list break on lower `g`, then on insertion order, so the
/// result is deterministic.
pub fn plan(
    spec: &ScenarioSpec,
    start: &Pose,
    params: &VehicleParams,
    cfg: &SearchConfig,
) -> Result<PlanResult, PlanError> {
    cfg.validate()?;
    let started = Instant::now();
    let goal = spec.goal();
    if spec.collides(&VehicleState::at_rest(*start), params) {
        return Err(PlanError::StartInCollision);
    }
    let steers = cfg.steers(params);
    let dirs: &[Direction] = if cfg.allow_reverse {
        &[Direction::Forward, Direction::Reverse]
    } else {
        &[Direction::Forward]
    };

    let mut nodes = vec![Node {
        point: PathPoint {
            pose: *start,
            direction: Direction::Forward,
            steer: 0.0,
            arc: 0.0,
        },
        g: 0.0,
        parent: None,
    }];
    let mut best_g: HashMap<Cell, f64> = HashMap::new();
    best_g.insert(cell_of(start, cfg), 0.0);
    let mut closed: HashMap<Cell, ()> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0;
    open.push(OpenEntry {
        f: heuristic(start, &goal, params),
        g: 0.0,
        seq,
        node: 0,
    });
    let mut expansions = 0;

    while let Some(entry) = open.pop() {
        let idx = entry.node;
        let pose = nodes[idx].point.pose;
        if at_goal(&pose, &goal, cfg) {
            let mut path = Vec::new();
            let mut cur = Some(idx);
            while let Some(i) = cur {
                path.push(nodes[i].point);
                cur = nodes[i].parent;
            }
            path.reverse();
            return Ok(PlanResult {
                path,
                cost: nodes[idx].g,
                expansions,
                planning_time: started.elapsed(),
            });
        }
        let cell = cell_of(&pose, cfg);
        if closed.insert(cell, ()).is_some() {
            continue;
        }
        if expansions >= cfg.max_expansions {
            break;
        }
        expansions += 1;
        let prev_dir = nodes[idx].parent.map(|_| nodes[idx].point.direction);
        for &dir in dirs {
            for &steer in &steers {
                let mut poses = integrate_primitive(&pose, dir, steer, cfg.arc_length, cfg.check_spacing, params);
                // the goal window is much smaller than a primitive, so a
                // primitive may stop early at the first pose inside it
                let mut arc = cfg.arc_length;
                if let Some(k) = poses.iter().position(|p| at_goal(p, &goal, cfg)) {
                    arc = cfg.arc_length * (k + 1) as f64 / poses.len() as f64;
                    poses.truncate(k + 1);
                }
                let end = *poses.last().expect("primitive has at least one pose");
                let c = cell_of(&end, cfg);
                let reaches_goal = arc < cfg.arc_length || at_goal(&end, &goal, cfg);
                if closed.contains_key(&c) && !reaches_goal {
                    continue;
                }
                if poses.iter().any(|p| spec.collides(&VehicleState::at_rest(*p), params)) {
                    continue;
                }
                let g = nodes[idx].g + primitive_cost(cfg, dir, steer, prev_dir) - (cfg.arc_length - arc) * dir_scale(cfg, dir);
                if !reaches_goal && best_g.get(&c).is_some_and(|&b| b <= g) {
                    continue;
                }
                best_g.insert(c, g);
                nodes.push(Node {
                    point: PathPoint {
                        pose: end,
                        direction: dir,
                        steer,
                        arc,
                    },
                    g,
                    parent: Some(idx),
                });
                seq += 1;
                open.push(OpenEntry {
                    f: g + heuristic(&end, &goal, params),
                    g,
                    seq,
                    node: nodes.len() - 1,
                });
            }
        }
    }
    Err(PlanError::NoPath { expansions })
}

/// Dense poses along `path` at most `spacing` apart, each tagged with the
/// primitive that produced it.
pub fn interpolate_path(path: &[PathPoint], spacing: f64, params: &VehicleParams) -> Vec<PathPoint> {
    let Some(first) = path.first() else {
        return Vec::new();
    };
    let mut out = vec![*first];
    for w in path.windows(2) {
        let seg = w[1];
        for pose in integrate_primitive(&w[0].pose, seg.direction, seg.steer, seg.arc, spacing, params) {
            out.push(PathPoint { pose, ..seg });
        }
    }
    out
}

/// Re-check `path` against the scenario: every primitive is re-integrated at
/// `spacing` or finer, must land on the recorded pose, and every
/// intermediate footprint must be collision-free.
pub fn validate_path(path: &[PathPoint], spec: &ScenarioSpec, params: &VehicleParams, spacing: f64) -> bool {
    if let Some(first) = path.first() {
        if spec.collides(&VehicleState::at_rest(first.pose), params) {
            return false;
        }
    }
    path.windows(2).all(|w| {
        let poses = integrate_primitive(&w[0].pose, w[1].direction, w[1].steer, w[1].arc, spacing, params);
        let end = poses.last().expect("non-empty");
        end.distance(&w[1].pose) < 1e-6
            && end.heading_error(&w[1].pose) < 1e-6
            && poses.iter().all(|p| !spec.collides(&VehicleState::at_rest(*p), params))
    })
}

/// Path as trajectory rows: unit speed signed by direction, throttle
/// carrying the direction sign, no rewards.
pub fn path_rows(path: &[PathPoint]) -> Vec<TrajectoryRow> {
    path.iter()
        .enumerate()
        .map(|(i, p)| TrajectoryRow {
            t: i,
            x: p.pose.x,
            y: p.pose.y,
            theta: p.pose.theta,
            v: if i == 0 { 0.0 } else { p.direction.sign() },
            steer: p.steer,
            throttle: if i == 0 { 0.0 } else { p.direction.sign() },
            reward: 0.0,
            collision: false,
            success: false,
        })
        .collect()
}
