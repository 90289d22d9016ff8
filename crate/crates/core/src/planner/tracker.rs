use super::{plan, Direction, PathPoint, PlanError, PlanResult, SearchConfig};
use crate::env::ParkingEnv;
use crate::error::Result;
use crate::sac::Agent;
use crate::sim::{ControlInput, VehicleParams};

/// Maximal run of primitives in one direction, between two stops.
#[derive(Debug, Clone)]
struct Segment {
    direction: Direction,
    /// `(arc length, steer)` of each primitive in order.
    pieces: Vec<(f64, f64)>,
    length: f64,
}

impl Segment {
    /// Mean of `tan(steer)` over `[s0, s0 + d]`, i.e. the curvature that
    /// turns the heading by exactly the planned amount over that stretch.
    fn mean_tan_steer(&self, s0: f64, d: f64) -> f64 {
        if d <= 0.0 {
            let mut acc = 0.0;
            for &(arc, steer) in &self.pieces {
                acc += arc;
                if s0 < acc {
                    return steer.tan();
                }
            }
            return self.pieces.last().map_or(0.0, |p| p.1.tan());
        }
        let (lo, hi) = (s0, (s0 + d).min(self.length));
        let mut start = 0.0;
        let mut sum = 0.0;
        for &(arc, steer) in &self.pieces {
            let overlap = (start + arc).min(hi) - start.max(lo);
            if overlap > 0.0 {
                sum += overlap * steer.tan();
            }
            start += arc;
        }
        // travel past the end keeps the last steer
        if s0 + d > self.length {
            sum += (s0 + d - self.length) * self.pieces.last().map_or(0.0, |p| p.1.tan());
        }
        sum / d
    }
}

/// Drives a planned path by dead reckoning: distance travelled is
/// accumulated from the known speed, steering reproduces the planned
/// curvature over each step, and the speed profile stops exactly at every
/// direction change and at the end. The simulator has no process noise, so
/// this follows the plan up to integration error.
#[derive(Debug, Clone)]
pub struct PathTracker {
    segments: Vec<Segment>,
    seg: usize,
    travelled: f64,
    pub cruise_speed: f64,
    /// Deceleration used to plan each stop; below the vehicle limit so the
    /// profile stays reachable.
    pub decel: f64,
}

impl PathTracker {
    pub fn new(path: &[PathPoint], params: &VehicleParams) -> Self {
        let mut segments: Vec<Segment> = Vec::new();
        for p in path.iter().skip(1) {
            match segments.last_mut() {
                Some(s) if s.direction == p.direction => {
                    s.pieces.push((p.arc, p.steer));
                    s.length += p.arc;
                }
                _ => segments.push(Segment {
                    direction: p.direction,
                    pieces: vec![(p.arc, p.steer)],
                    length: p.arc,
                }),
            }
        }
        Self {
            segments,
            seg: 0,
            travelled: 0.0,
            cruise_speed: 1.0,
            decel: 0.5 * params.max_accel,
        }
    }

    pub fn finished(&self) -> bool {
        self.seg >= self.segments.len()
    }

    /// Control for a vehicle currently moving at `v`.
    pub fn control(&mut self, v: f64, params: &VehicleParams, dt: f64) -> ControlInput {
        const EPS: f64 = 1e-9;
        let dv_max = params.max_accel * dt;
        loop {
            let Some(seg) = self.segments.get(self.seg) else {
                return ControlInput::new(0.0, (-v / dv_max).clamp(-1.0, 1.0));
            };
            if self.travelled >= seg.length - EPS && v.abs() < EPS {
                self.seg += 1;
                self.travelled = 0.0;
                continue;
            }
            let sign = seg.direction.sign();
            // this step covers |v| dt whatever we command now
            let d = v.abs() * dt;
            let tan = seg.mean_tan_steer(self.travelled, d);
            self.travelled += d;
            let rem = (seg.length - self.travelled).max(0.0);
            let speed = self.cruise_speed.min((2.0 * self.decel * rem).sqrt()).min(rem / dt);
            let throttle = ((sign * speed - v) / dv_max).clamp(-1.0, 1.0);
            let steer = tan.atan().clamp(-params.max_steer, params.max_steer);
            return ControlInput::new(steer, throttle);
        }
    }
}

/// Plans with Hybrid A* at the start of each episode, then tracks the path.
/// If planning fails the vehicle stays put until the episode times out.
#[derive(Debug, Clone)]
pub struct PlannerAgent {
    pub search: SearchConfig,
    tracker: Option<PathTracker>,
    pub last_plan: Option<std::result::Result<PlanResult, PlanError>>,
}

impl PlannerAgent {
    pub fn new(search: SearchConfig) -> Self {
        Self {
            search,
            tracker: None,
            last_plan: None,
        }
    }
}

impl Agent for PlannerAgent {
    fn begin_episode(&mut self, env: &ParkingEnv) {
        let params = env.config().vehicle;
        let res = plan(env.spec(), &env.state().pose, &params, &self.search);
        self.tracker = res.as_ref().ok().map(|r| PathTracker::new(&r.path, &params));
        self.last_plan = Some(res);
    }

    fn act(&mut self, _obs: &[f64], env: &ParkingEnv) -> Result<ControlInput> {
        let params = env.config().vehicle;
        let s = env.state();
        Ok(match &mut self.tracker {
            Some(t) => t.control(s.v, &params, env.config().dt),
            None => ControlInput::new(0.0, (-s.v / (params.max_accel * env.config().dt)).clamp(-1.0, 1.0)),
        })
    }
}
