//! Vehicle kinematics, rectangle collision geometry and simulated sensing.
//!
//! Everything here is a pure function of its inputs (plus an explicit rng for
//! sensor noise), so the environment and the Hybrid A* planner can share it.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

/// Map an angle onto `(-pi, pi]`.
///
/// Panics on non-finite input.
pub fn normalize_angle(a: f64) -> f64 {
    assert!(a.is_finite(), "normalize_angle: non-finite angle {a}");
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub body_length: f64,
    pub body_width: f64,
    pub max_steer: f64,
    pub max_accel: f64,
    pub max_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            body_length: 4.0,
            body_width: 1.8,
            max_steer: 30f64.to_radians(),
            max_accel: 1.0,
            max_speed: 2.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("wheelbase", self.wheelbase),
            ("body_length", self.body_length),
            ("body_width", self.body_width),
            ("max_steer", self.max_steer),
            ("max_accel", self.max_accel),
            ("max_speed", self.max_speed),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.max_steer >= PI / 2.0 {
            return Err(format!("max_steer must be below pi/2, got {}", self.max_steer));
        }
        if self.body_length <= self.wheelbase {
            return Err("body_length must exceed wheelbase".into());
        }
        Ok(())
    }

    /// Radius of the tightest turn, `L / tan(max_steer)`.
    pub fn min_turning_radius(&self) -> f64 {
        self.wheelbase / self.max_steer.tan()
    }

    pub fn half_extents(&self) -> (f64, f64) {
        (self.body_length / 2.0, self.body_width / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Absolute heading error, in `[0, pi]`.
    pub fn heading_error(&self, other: &Pose) -> f64 {
        normalize_angle(self.theta - other.theta).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub pose: Pose,
    pub v: f64,
}

impl VehicleState {
    pub fn at_rest(pose: Pose) -> Self {
        Self { pose, v: 0.0 }
    }

    /// Body rectangle, centered on the pose.
    pub fn footprint(&self, params: &VehicleParams) -> OrientedRect {
        let (hx, hy) = params.half_extents();
        OrientedRect::new((self.pose.x, self.pose.y), (hx, hy), self.pose.theta)
    }
}

/// Steering angle (radians) and throttle/brake in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub steer: f64,
    pub throttle: f64,
}

impl ControlInput {
    pub fn new(steer: f64, throttle: f64) -> Self {
        Self { steer, throttle }
    }

    pub fn within(&self, params: &VehicleParams) -> bool {
        self.steer.abs() <= params.max_steer && self.throttle.abs() <= 1.0
    }
}

/// Advance one forward-Euler step of the kinematic bicycle model.
///
/// Position and heading use the speed at the start of the step; the speed is
/// then integrated from the throttle and clamped to `max_speed`.
pub fn step_kinematics(
    state: &VehicleState,
    u: &ControlInput,
    params: &VehicleParams,
    dt: f64,
) -> VehicleState {
    assert!(dt > 0.0, "step_kinematics: dt must be positive");
    assert!(
        u.within(params),
        "step_kinematics: control {u:?} outside vehicle bounds"
    );
    let Pose { x, y, theta } = state.pose;
    let v = state.v;
    let (sin, cos) = theta.sin_cos();
    let pose = Pose {
        x: x + v * cos * dt,
        y: y + v * sin * dt,
        theta: normalize_angle(theta + v / params.wheelbase * u.steer.tan() * dt),
    };
    let v_next = (v + u.throttle * params.max_accel * dt).clamp(-params.max_speed, params.max_speed);
    VehicleState { pose, v: v_next }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: (f64, f64),
    pub half_extents: (f64, f64),
    pub heading: f64,
}

impl OrientedRect {
    pub fn new(center: (f64, f64), half_extents: (f64, f64), heading: f64) -> Self {
        debug_assert!(half_extents.0 > 0.0 && half_extents.1 > 0.0);
        Self {
            center,
            half_extents,
            heading,
        }
    }

    /// Unit vectors of the local x and y axes.
    pub fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let [ax, ay] = self.axes();
        let (hx, hy) = self.half_extents;
        let (cx, cy) = self.center;
        let mut out = [(0.0, 0.0); 4];
        for (i, (sx, sy)) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .into_iter()
            .enumerate()
        {
            out[i] = (
                cx + sx * hx * ax.0 + sy * hy * ay.0,
                cy + sx * hx * ax.1 + sy * hy * ay.1,
            );
        }
        out
    }

    /// Coordinates of a world point in this rectangle's frame.
    pub fn to_local(&self, p: (f64, f64)) -> (f64, f64) {
        let [ax, ay] = self.axes();
        let d = (p.0 - self.center.0, p.1 - self.center.1);
        (d.0 * ax.0 + d.1 * ax.1, d.0 * ay.0 + d.1 * ay.1)
    }

    /// Closed containment test.
    pub fn contains_point(&self, p: (f64, f64)) -> bool {
        let (lx, ly) = self.to_local(p);
        lx.abs() <= self.half_extents.0 && ly.abs() <= self.half_extents.1
    }

    /// True when every corner of `inner` lies strictly inside `self`.
    pub fn strictly_contains_rect(&self, inner: &OrientedRect) -> bool {
        inner.corners().iter().all(|&p| {
            let (lx, ly) = self.to_local(p);
            lx.abs() < self.half_extents.0 && ly.abs() < self.half_extents.1
        })
    }

    pub fn inflated(&self, margin: f64) -> OrientedRect {
        OrientedRect {
            half_extents: (self.half_extents.0 + margin, self.half_extents.1 + margin),
            ..*self
        }
    }

    fn projected_radius(&self, axis: (f64, f64)) -> f64 {
        let [ax, ay] = self.axes();
        self.half_extents.0 * (ax.0 * axis.0 + ax.1 * axis.1).abs()
            + self.half_extents.1 * (ay.0 * axis.0 + ay.1 * axis.1).abs()
    }

    /// Distance along a unit ray to where it first meets this rectangle's
    /// boundary from outside, or leaves it when the origin is inside.
    /// `None` if the ray misses.
    fn ray_interval(&self, origin: (f64, f64), dir: (f64, f64)) -> Option<(f64, f64)> {
        let [ax, ay] = self.axes();
        let p = self.to_local(origin);
        let q = (dir.0 * ax.0 + dir.1 * ax.1, dir.0 * ay.0 + dir.1 * ay.1);
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        for (pi, qi, h) in [(p.0, q.0, self.half_extents.0), (p.1, q.1, self.half_extents.1)] {
            if qi.abs() < 1e-12 {
                if pi.abs() > h {
                    return None;
                }
                continue;
            }
            let t1 = (-h - pi) / qi;
            let t2 = (h - pi) / qi;
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            t_enter = t_enter.max(lo);
            t_exit = t_exit.min(hi);
        }
        if t_exit < t_enter.max(0.0) {
            None
        } else {
            Some((t_enter, t_exit))
        }
    }
}

/// Separating-axis test over the four edge normals. Touching rectangles
/// count as colliding.
pub fn rect_collision(a: &OrientedRect, b: &OrientedRect) -> bool {
    let d = (b.center.0 - a.center.0, b.center.1 - a.center.1);
    // bounding-circle early out
    let reach = a.half_extents.0.hypot(a.half_extents.1) + b.half_extents.0.hypot(b.half_extents.1);
    if d.0 * d.0 + d.1 * d.1 > reach * reach {
        return false;
    }
    let [a0, a1] = a.axes();
    let [b0, b1] = b.axes();
    [a0, a1, b0, b1].into_iter().all(|axis| {
        let dist = (d.0 * axis.0 + d.1 * axis.1).abs();
        dist <= a.projected_radius(axis) + b.projected_radius(axis)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarConfig {
    pub n_rays: usize,
    pub max_range: f64,
    pub noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            n_rays: 16,
            max_range: 10.0,
            noise_sigma: 0.01,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_rays == 0 {
            return Err("n_rays must be at least 1".into());
        }
        if !(self.max_range > 0.0) {
            return Err("max_range must be positive".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return Err("noise_sigma must be non-negative".into());
        }
        Ok(())
    }
}

/// Noise-free range of a single ray against obstacles and the lot walls.
pub fn raycast(
    origin: (f64, f64),
    heading: f64,
    obstacles: &[OrientedRect],
    lot: &OrientedRect,
    max_range: f64,
) -> f64 {
    let dir = (heading.cos(), heading.sin());
    let mut best = max_range;
    if let Some((_, exit)) = lot.ray_interval(origin, dir) {
        best = best.min(exit.max(0.0));
    } else {
        // outside the lot: already in a wall
        return 0.0;
    }
    for ob in obstacles {
        if let Some((enter, _)) = ob.ray_interval(origin, dir) {
            best = best.min(enter.max(0.0));
        }
    }
    best
}

/// Ray `i` points at `theta + 2*pi*i/n` from the vehicle center. One
/// standard-normal draw is consumed per ray even when the noise is zero.
pub fn lidar_scan<R: Rng + ?Sized>(
    state: &VehicleState,
    obstacles: &[OrientedRect],
    lot: &OrientedRect,
    cfg: &LidarConfig,
    rng: &mut R,
) -> Vec<f64> {
    let origin = (state.pose.x, state.pose.y);
    (0..cfg.n_rays)
        .map(|i| {
            let heading = state.pose.theta + 2.0 * PI * i as f64 / cfg.n_rays as f64;
            let clean = raycast(origin, heading, obstacles, lot, cfg.max_range);
            let xi: f64 = rng.sample(StandardNormal);
            (clean + cfg.noise_sigma * xi).clamp(0.0, cfg.max_range)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            width: 16,
            height: 16,
        }
    }
}

/// Binary occupancy grid in the vehicle frame. Columns run along the vehicle
/// heading, rows along its left side; `cells` is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

impl OccupancyGrid {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    /// Vehicle-frame coordinates of a cell center.
    pub fn cell_center_local(resolution: f64, width: usize, height: usize, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5 - width as f64 / 2.0) * resolution,
            (row as f64 + 0.5 - height as f64 / 2.0) * resolution,
        )
    }
}

pub fn rasterize_grid(
    state: &VehicleState,
    obstacles: &[OrientedRect],
    lot: &OrientedRect,
    cfg: &GridConfig,
) -> OccupancyGrid {
    assert!(cfg.resolution > 0.0 && cfg.width > 0 && cfg.height > 0);
    let (s, c) = state.pose.theta.sin_cos();
    let mut cells = vec![0u8; cfg.width * cfg.height];
    for row in 0..cfg.height {
        for col in 0..cfg.width {
            let (lx, ly) =
                OccupancyGrid::cell_center_local(cfg.resolution, cfg.width, cfg.height, row, col);
            let p = (
                state.pose.x + lx * c - ly * s,
                state.pose.y + lx * s + ly * c,
            );
            let occupied = !lot.contains_point(p) || obstacles.iter().any(|o| o.contains_point(p));
            cells[row * cfg.width + col] = occupied as u8;
        }
    }
    OccupancyGrid {
        resolution: cfg.resolution,
        width: cfg.width,
        height: cfg.height,
        cells,
    }
}
