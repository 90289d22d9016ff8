//! C ABI over the parking environment, a trained policy and the Hybrid A*
//! planner.
//!
//! Every handle is opaque and owned by the caller, who frees it with the
//! matching `*_free` function. Functions return a [`ParksacStatus`]; on
//! failure a message for the calling thread is available from
//! [`parksac_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use parksac::checkpoint::{load_checkpoint, CheckpointError};
use parksac::env::{make_scenario, EnvConfig, EnvError, ParkingEnv, ScenarioKind};
use parksac::nn::GaussianPolicy;
use parksac::planner::{plan, PlanError, PlanResult, SearchConfig};
use parksac::sim::ControlInput;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParksacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    EpisodeDone = 4,
    NotReset = 5,
    NoPath = 6,
    Io = 7,
    CorruptFile = 8,
    Internal = 9,
}

/// Outcome of one environment step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ParksacStepResult {
    pub reward: f64,
    pub done: bool,
    pub collision: bool,
    pub success: bool,
    pub timeout: bool,
    pub dist: f64,
    pub dtheta: f64,
    pub t: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ParksacPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Opaque environment handle.
pub struct ParksacEnv {
    env: ParkingEnv,
}

/// Opaque policy handle.
pub struct ParksacPolicy {
    policy: GaussianPolicy,
}

/// Opaque planned path.
pub struct ParksacPath {
    result: PlanResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: ParksacStatus, msg: impl Into<String>) -> ParksacStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> ParksacStatus) -> ParksacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ParksacStatus::Internal, "internal panic"),
    }
}

fn env_status(e: &EnvError) -> ParksacStatus {
    let s = match e {
        EnvError::EpisodeDone => ParksacStatus::EpisodeDone,
        EnvError::NotReset => ParksacStatus::NotReset,
        _ => ParksacStatus::InvalidArgument,
    };
    fail(s, e.to_string())
}

fn checkpoint_status(e: &CheckpointError) -> ParksacStatus {
    let s = match e {
        CheckpointError::Io(_) => ParksacStatus::Io,
        _ => ParksacStatus::CorruptFile,
    };
    fail(s, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, ParksacStatus> {
    if p.is_null() {
        return Err(fail(ParksacStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ParksacStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn write_obs(obs: &[f64], out: *mut f64, len: usize) -> ParksacStatus {
    if out.is_null() {
        return ParksacStatus::Ok;
    }
    if len < obs.len() {
        return fail(
            ParksacStatus::BufferTooSmall,
            format!("observation needs {} values, buffer holds {len}", obs.len()),
        );
    }
    ptr::copy_nonoverlapping(obs.as_ptr(), out, obs.len());
    ParksacStatus::Ok
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn parksac_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Create an environment on layout `make_scenario(kind, layout_seed)` with
/// default settings. `kind` is "parallel", "perpendicular" or "mixed".
#[no_mangle]
pub unsafe extern "C" fn parksac_env_new(
    kind: *const c_char,
    layout_seed: u64,
    out: *mut *mut ParksacEnv,
) -> ParksacStatus {
    guard(|| {
        if out.is_null() {
            return fail(ParksacStatus::NullPointer, "null output handle");
        }
        let kind: ScenarioKind = match str_arg(kind).map(str::parse) {
            Ok(Ok(k)) => k,
            Ok(Err(e)) => return env_status(&e),
            Err(s) => return s,
        };
        let env = match make_scenario(kind, layout_seed).and_then(|spec| ParkingEnv::new(spec, EnvConfig::default())) {
            Ok(e) => e,
            Err(e) => return env_status(&e),
        };
        *out = Box::into_raw(Box::new(ParksacEnv { env }));
        ParksacStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn parksac_env_free(env: *mut ParksacEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Length of the observation vector.
#[no_mangle]
pub unsafe extern "C" fn parksac_env_obs_dim(env: *const ParksacEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.obs_dim())
}

/// Start an episode; writes the first observation into `obs` if non-null.
#[no_mangle]
pub unsafe extern "C" fn parksac_env_reset(
    env: *mut ParksacEnv,
    episode_seed: u64,
    obs: *mut f64,
    obs_len: usize,
) -> ParksacStatus {
    guard(|| {
        let Some(e) = env.as_mut() else {
            return fail(ParksacStatus::NullPointer, "null environment");
        };
        match e.env.reset(episode_seed) {
            Ok(o) => write_obs(&o, obs, obs_len),
            Err(err) => env_status(&err),
        }
    })
}

/// Apply one control; writes the next observation and the step outcome.
#[no_mangle]
pub unsafe extern "C" fn parksac_env_step(
    env: *mut ParksacEnv,
    steer: f64,
    throttle: f64,
    obs: *mut f64,
    obs_len: usize,
    result: *mut ParksacStepResult,
) -> ParksacStatus {
    guard(|| {
        let Some(e) = env.as_mut() else {
            return fail(ParksacStatus::NullPointer, "null environment");
        };
        if !(steer.is_finite() && throttle.is_finite()) {
            return fail(ParksacStatus::InvalidArgument, "non-finite control");
        }
        let r = match e.env.step(ControlInput::new(steer, throttle)) {
            Ok(r) => r,
            Err(err) => return env_status(&err),
        };
        if let Some(out) = result.as_mut() {
            *out = ParksacStepResult {
                reward: r.reward,
                done: r.done,
                collision: r.info.collision,
                success: r.info.success,
                timeout: r.info.timeout,
                dist: r.info.dist,
                dtheta: r.info.dtheta,
                t: r.info.t as u64,
            };
        }
        write_obs(&r.obs, obs, obs_len)
    })
}

/// Current vehicle pose and speed.
#[no_mangle]
pub unsafe extern "C" fn parksac_env_pose(env: *const ParksacEnv, pose: *mut ParksacPose, speed: *mut f64) -> ParksacStatus {
    let Some(e) = env.as_ref() else {
        return fail(ParksacStatus::NullPointer, "null environment");
    };
    let s = e.env.state();
    if let Some(p) = pose.as_mut() {
        *p = ParksacPose {
            x: s.pose.x,
            y: s.pose.y,
            theta: s.pose.theta,
        };
    }
    if let Some(v) = speed.as_mut() {
        *v = s.v;
    }
    ParksacStatus::Ok
}

/// Load the policy from a training checkpoint.
#[no_mangle]
pub unsafe extern "C" fn parksac_policy_load(path: *const c_char, out: *mut *mut ParksacPolicy) -> ParksacStatus {
    guard(|| {
        if out.is_null() {
            return fail(ParksacStatus::NullPointer, "null output handle");
        }
        let p = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_checkpoint(Path::new(p)) {
            Ok(ck) => {
                *out = Box::into_raw(Box::new(ParksacPolicy { policy: ck.state.policy }));
                ParksacStatus::Ok
            }
            Err(e) => checkpoint_status(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn parksac_policy_free(policy: *mut ParksacPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

#[no_mangle]
pub unsafe extern "C" fn parksac_policy_obs_dim(policy: *const ParksacPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.policy.obs_dim())
}

/// Deterministic action `bound * tanh(mean)` for one observation.
#[no_mangle]
pub unsafe extern "C" fn parksac_policy_act(
    policy: *const ParksacPolicy,
    obs: *const f64,
    obs_len: usize,
    steer: *mut f64,
    throttle: *mut f64,
) -> ParksacStatus {
    guard(|| {
        let Some(p) = policy.as_ref() else {
            return fail(ParksacStatus::NullPointer, "null policy");
        };
        if obs.is_null() || steer.is_null() || throttle.is_null() {
            return fail(ParksacStatus::NullPointer, "null argument");
        }
        let o = std::slice::from_raw_parts(obs, obs_len);
        match p.policy.act_deterministic(o) {
            Ok(u) => {
                *steer = u.steer;
                *throttle = u.throttle;
                ParksacStatus::Ok
            }
            Err(e) => fail(ParksacStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Plan with default search settings from the environment's current pose
/// to its goal, among its static obstacles.
#[no_mangle]
pub unsafe extern "C" fn parksac_plan(env: *const ParksacEnv, out: *mut *mut ParksacPath) -> ParksacStatus {
    guard(|| {
        let Some(e) = env.as_ref() else {
            return fail(ParksacStatus::NullPointer, "null environment");
        };
        if out.is_null() {
            return fail(ParksacStatus::NullPointer, "null output handle");
        }
        let params = e.env.config().vehicle;
        match plan(e.env.spec(), &e.env.state().pose, &params, &SearchConfig::default()) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(ParksacPath { result }));
                ParksacStatus::Ok
            }
            Err(err @ PlanError::NoPath { .. }) => fail(ParksacStatus::NoPath, err.to_string()),
            Err(err) => fail(ParksacStatus::InvalidArgument, err.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn parksac_path_free(path: *mut ParksacPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of poses, including the start.
#[no_mangle]
pub unsafe extern "C" fn parksac_path_len(path: *const ParksacPath) -> usize {
    path.as_ref().map_or(0, |p| p.result.path.len())
}

#[no_mangle]
pub unsafe extern "C" fn parksac_path_cost(path: *const ParksacPath) -> f64 {
    path.as_ref().map_or(f64::NAN, |p| p.result.cost)
}

/// Pose `index` of the path; `reverse` is set when the primitive reaching
/// it drove backwards.
#[no_mangle]
pub unsafe extern "C" fn parksac_path_pose(
    path: *const ParksacPath,
    index: usize,
    pose: *mut ParksacPose,
    reverse: *mut bool,
) -> ParksacStatus {
    let Some(p) = path.as_ref() else {
        return fail(ParksacStatus::NullPointer, "null path");
    };
    let Some(pt) = p.result.path.get(index) else {
        return fail(ParksacStatus::InvalidArgument, format!("index {index} out of range"));
    };
    if let Some(o) = pose.as_mut() {
        *o = ParksacPose {
            x: pt.pose.x,
            y: pt.pose.y,
            theta: pt.pose.theta,
        };
    }
    if let Some(r) = reverse.as_mut() {
        *r = pt.direction == parksac::planner::Direction::Reverse;
    }
    ParksacStatus::Ok
}
