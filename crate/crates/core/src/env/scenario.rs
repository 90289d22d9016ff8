use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::EnvError;
use crate::seeding::{rng_for, DetRng, Stream};
use crate::sim::{rect_collision, OrientedRect, Pose, VehicleParams, VehicleState};

pub const LOT_HALF_SIZE: f64 = 10.0;
/// Target spot: 4 m long, 2 m wide.
pub const SPOT_HALF_EXTENTS: (f64, f64) = (2.0, 1.0);
const PARKED_CAR_HALF_EXTENTS: (f64, f64) = (2.0, 0.9);
const MAX_LAYOUT_ATTEMPTS: usize = 200;
const MAX_START_ATTEMPTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Parallel,
    Perpendicular,
    Mixed,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Parallel,
        ScenarioKind::Perpendicular,
        ScenarioKind::Mixed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Parallel => "parallel",
            ScenarioKind::Perpendicular => "perpendicular",
            ScenarioKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parallel" => Ok(ScenarioKind::Parallel),
            "perpendicular" => Ok(ScenarioKind::Perpendicular),
            "mixed" => Ok(ScenarioKind::Mixed),
            other => Err(EnvError::UnknownScenario(other.to_string())),
        }
    }
}

/// Box of initial poses; speed always starts at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartSampler {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub theta: (f64, f64),
}

impl StartSampler {
    pub fn center(&self) -> Pose {
        Pose::new(
            0.5 * (self.x.0 + self.x.1),
            0.5 * (self.y.0 + self.y.1),
            0.5 * (self.theta.0 + self.theta.1),
        )
    }

    fn draw(&self, rng: &mut DetRng) -> Pose {
        let pick = |rng: &mut DetRng, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.gen_range(lo..hi)
            } else {
                lo
            }
        };
        let x = pick(rng, self.x);
        let y = pick(rng, self.y);
        let theta = pick(rng, self.theta);
        Pose::new(x, y, theta)
    }
}

/// Obstacle translating at constant velocity, reflecting off the lot walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingObstacle {
    pub rect: OrientedRect,
    pub velocity: (f64, f64),
}

impl MovingObstacle {
    pub fn advance(&mut self, lot: &OrientedRect, dt: f64) {
        let (hx, hy) = self.rect.half_extents;
        // circumscribed radius keeps any heading strictly inside
        let reach = hx.hypot(hy);
        let (lo_x, hi_x) = (lot.center.0 - lot.half_extents.0 + reach, lot.center.0 + lot.half_extents.0 - reach);
        let (lo_y, hi_y) = (lot.center.1 - lot.half_extents.1 + reach, lot.center.1 + lot.half_extents.1 - reach);
        let mut x = self.rect.center.0 + self.velocity.0 * dt;
        let mut y = self.rect.center.1 + self.velocity.1 * dt;
        if x < lo_x || x > hi_x {
            self.velocity.0 = -self.velocity.0;
            x = x.clamp(lo_x, hi_x);
        }
        if y < lo_y || y > hi_y {
            self.velocity.1 = -self.velocity.1;
            y = y.clamp(lo_y, hi_y);
        }
        self.rect.center = (x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub vehicle: VehicleParams,
    /// Constant-velocity obstacles added on top of the static layout.
    pub moving_obstacles: usize,
    pub moving_speed: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            moving_obstacles: 0,
            moving_speed: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub lot: OrientedRect,
    /// Target spot; its heading is the goal heading (vehicle nose direction).
    pub target: OrientedRect,
    pub obstacles: Vec<OrientedRect>,
    pub moving: Vec<MovingObstacle>,
    pub start: StartSampler,
}

impl ScenarioSpec {
    pub fn goal(&self) -> Pose {
        Pose::new(self.target.center.0, self.target.center.1, self.target.heading)
    }

    /// True when the footprint of `state` touches an obstacle in `obstacles`
    /// or leaves the lot interior.
    pub fn footprint_collides(
        &self,
        state: &VehicleState,
        params: &VehicleParams,
        obstacles: &[OrientedRect],
    ) -> bool {
        let fp = state.footprint(params);
        !self.lot.strictly_contains_rect(&fp) || obstacles.iter().any(|o| rect_collision(&fp, o))
    }

    /// Static collision check against the scenario's fixed obstacles.
    pub fn collides(&self, state: &VehicleState, params: &VehicleParams) -> bool {
        self.footprint_collides(state, params, &self.obstacles)
    }

    /// Draw a collision-free start pose, rejecting up to a fixed bound.
    pub fn sample_start(&self, episode_seed: u64, params: &VehicleParams) -> Result<VehicleState, EnvError> {
        let mut rng = rng_for(self.seed ^ episode_seed.rotate_left(17), Stream::EpisodeStart, episode_seed);
        let mut all = self.obstacles.clone();
        all.extend(self.moving.iter().map(|m| m.rect));
        for _ in 0..MAX_START_ATTEMPTS {
            let state = VehicleState::at_rest(self.start.draw(&mut rng));
            if !self.footprint_collides(&state, params, &all) {
                return Ok(state);
            }
        }
        Err(EnvError::NoFreeStart {
            kind: self.kind,
            seed: self.seed,
        })
    }
}

pub fn make_scenario(kind: ScenarioKind, seed: u64) -> Result<ScenarioSpec, EnvError> {
    make_scenario_with(kind, seed, &ScenarioOptions::default())
}

/// Seeded layout generator. Layouts whose start box is mostly blocked are
/// redrawn internally a bounded number of times before giving up.
pub fn make_scenario_with(
    kind: ScenarioKind,
    seed: u64,
    opts: &ScenarioOptions,
) -> Result<ScenarioSpec, EnvError> {
    for attempt in 0..MAX_LAYOUT_ATTEMPTS as u64 {
        let mut rng = rng_for(seed, Stream::Scenario, attempt);
        let mut spec = match kind {
            ScenarioKind::Parallel => parallel_layout(&mut rng, seed),
            ScenarioKind::Perpendicular => perpendicular_layout(&mut rng, seed),
            ScenarioKind::Mixed => mixed_layout(&mut rng, seed),
        };
        add_moving(&mut spec, &mut rng, opts);
        if layout_is_valid(&spec, &opts.vehicle) {
            return Ok(spec);
        }
    }
    Err(EnvError::NoFreeStart { kind, seed })
}

fn lot() -> OrientedRect {
    OrientedRect::new((0.0, 0.0), (LOT_HALF_SIZE, LOT_HALF_SIZE), 0.0)
}

fn layout_is_valid(spec: &ScenarioSpec, params: &VehicleParams) -> bool {
    if !spec.lot.strictly_contains_rect(&spec.target) {
        return false;
    }
    // the goal pose itself must be free, and the start box's center must be usable
    let goal = VehicleState::at_rest(spec.goal());
    if spec.collides(&goal, params) {
        return false;
    }
    let center = VehicleState::at_rest(spec.start.center());
    !spec.collides(&center, params) && spec.sample_start(0, params).is_ok()
}

fn parked_car(center: (f64, f64), heading: f64) -> OrientedRect {
    OrientedRect::new(center, PARKED_CAR_HALF_EXTENTS, heading)
}

/// Spot against the lower wall, long edge parallel to it, with parked cars
/// leaving 1.5 m of maneuvering room at each end. The vehicle starts in
/// the aisle ahead of the spot.
fn parallel_layout(rng: &mut DetRng, seed: u64) -> ScenarioSpec {
    let tx = rng.gen_range(-3.0..3.0);
    let ty = -LOT_HALF_SIZE + 0.3 + SPOT_HALF_EXTENTS.1;
    let target = OrientedRect::new((tx, ty), SPOT_HALF_EXTENTS, 0.0);
    let gap = 1.5;
    let pitch = 2.0 * SPOT_HALF_EXTENTS.0 + gap;
    let mut obstacles = vec![
        parked_car((tx - pitch, ty), 0.0),
        parked_car((tx + pitch, ty), 0.0),
    ];
    // more cars further along the curb, each present with probability 0.5
    for k in [-2.0, 2.0] {
        let cx = tx + k * (pitch + 0.5);
        if rng.gen_bool(0.5) && cx.abs() + PARKED_CAR_HALF_EXTENTS.0 < LOT_HALF_SIZE {
            obstacles.push(parked_car((cx, ty), 0.0));
        }
    }
    // a row on the far side of the aisle
    let mut x = -LOT_HALF_SIZE + 1.5;
    while x < LOT_HALF_SIZE - 1.5 {
        if rng.gen_bool(0.4) {
            obstacles.push(parked_car((x, LOT_HALF_SIZE - 0.3 - 2.0), FRAC_PI_2));
        }
        x += 2.6;
    }
    ScenarioSpec {
        kind: ScenarioKind::Parallel,
        seed,
        lot: lot(),
        target,
        obstacles,
        moving: Vec::new(),
        start: StartSampler {
            x: (tx + 3.0, tx + 5.0),
            y: (ty + 3.0, ty + 4.0),
            theta: (-0.15, 0.15),
        },
    }
}

/// Row of 2 m wide bays along the upper wall, the target flanked by parked
/// cars; the vehicle starts at the bay's mouth, roughly facing into it.
fn perpendicular_layout(rng: &mut DetRng, seed: u64) -> ScenarioSpec {
    let pitch = 2.6;
    let tx = rng.gen_range(-4.0..4.0);
    let ty = LOT_HALF_SIZE - 0.5 - SPOT_HALF_EXTENTS.0;
    let target = OrientedRect::new((tx, ty), SPOT_HALF_EXTENTS, FRAC_PI_2);
    let mut obstacles = vec![
        parked_car((tx - pitch, ty), FRAC_PI_2),
        parked_car((tx + pitch, ty), FRAC_PI_2),
    ];
    for k in [-3.0, -2.0, 2.0, 3.0] {
        let cx: f64 = tx + k * pitch;
        if cx.abs() + PARKED_CAR_HALF_EXTENTS.1 < LOT_HALF_SIZE - 0.2 && rng.gen_bool(0.6) {
            obstacles.push(parked_car((cx, ty), FRAC_PI_2));
        }
    }
    // opposite row
    let mut x = -LOT_HALF_SIZE + 1.3;
    while x < LOT_HALF_SIZE - 1.0 {
        if rng.gen_bool(0.5) {
            obstacles.push(parked_car((x, -ty), FRAC_PI_2));
        }
        x += pitch;
    }
    ScenarioSpec {
        kind: ScenarioKind::Perpendicular,
        seed,
        lot: lot(),
        target,
        obstacles,
        moving: Vec::new(),
        start: StartSampler {
            x: (tx - 0.4, tx + 0.4),
            y: (ty - 4.5, ty - 3.0),
            theta: (FRAC_PI_2 - 0.15, FRAC_PI_2 + 0.15),
        },
    }
}

/// Spot against a random wall in a random orientation, 3 to 8 random
/// obstacles kept out of the spot's approach lane and the start area.
fn mixed_layout(rng: &mut DetRng, seed: u64) -> ScenarioSpec {
    // outward normal of the chosen wall
    let wall = rng.gen_range(0..4);
    let normal_angle = wall as f64 * FRAC_PI_2;
    let (nx, ny) = (normal_angle.cos(), normal_angle.sin());
    let (ax, ay) = (-ny, nx);
    let bay = rng.gen_bool(0.5);
    let along = rng.gen_range(-5.0..5.0);
    // nose points toward the wall in a bay, along the wall otherwise
    let (depth_half, heading) = if bay {
        (SPOT_HALF_EXTENTS.0, normal_angle)
    } else {
        (SPOT_HALF_EXTENTS.1, normal_angle + FRAC_PI_2 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
    };
    let inset = LOT_HALF_SIZE - 0.4 - depth_half;
    let tc = (nx * inset + ax * along, ny * inset + ay * along);
    let target = OrientedRect::new(tc, SPOT_HALF_EXTENTS, heading);

    // approach lane: 6 m in front of the spot, 6 m wide
    let lane_center = (tc.0 - nx * (depth_half + 3.0), tc.1 - ny * (depth_half + 3.0));
    let lane = OrientedRect::new(lane_center, (3.0, 3.0 + SPOT_HALF_EXTENTS.0), normal_angle);
    let start_center = (-nx * 2.0 + ax * rng.gen_range(-2.0..2.0), -ny * 2.0 + ay * rng.gen_range(-2.0..2.0));
    let start_zone = OrientedRect::new(start_center, (4.5, 4.5), 0.0);
    let keep_clear = [target.inflated(1.0), lane, start_zone];

    let n = rng.gen_range(3..=8);
    let mut obstacles = Vec::with_capacity(n);
    let mut tries = 0;
    while obstacles.len() < n && tries < 1000 {
        tries += 1;
        let half = (rng.gen_range(0.4..2.0), rng.gen_range(0.4..1.2));
        let center = (
            rng.gen_range(-LOT_HALF_SIZE + 1.0..LOT_HALF_SIZE - 1.0),
            rng.gen_range(-LOT_HALF_SIZE + 1.0..LOT_HALF_SIZE - 1.0),
        );
        let ob = OrientedRect::new(center, half, rng.gen_range(0.0..PI));
        if keep_clear.iter().any(|k| rect_collision(k, &ob)) {
            continue;
        }
        obstacles.push(ob);
    }
    // start facing the spot, give or take 30 degrees
    let to_goal = (tc.1 - start_center.1).atan2(tc.0 - start_center.0);
    ScenarioSpec {
        kind: ScenarioKind::Mixed,
        seed,
        lot: lot(),
        target,
        obstacles,
        moving: Vec::new(),
        start: StartSampler {
            x: (start_center.0 - 1.0, start_center.0 + 1.0),
            y: (start_center.1 - 1.0, start_center.1 + 1.0),
            theta: (to_goal - 0.5, to_goal + 0.5),
        },
    }
}

fn add_moving(spec: &mut ScenarioSpec, rng: &mut DetRng, opts: &ScenarioOptions) {
    for _ in 0..opts.moving_obstacles {
        let center = (rng.gen_range(-6.0..6.0), rng.gen_range(-3.0..3.0));
        let dir = rng.gen_range(-PI..PI);
        spec.moving.push(MovingObstacle {
            rect: OrientedRect::new(center, (0.3, 0.3), 0.0),
            velocity: (opts.moving_speed * dir.cos(), opts.moving_speed * dir.sin()),
        });
    }
}
