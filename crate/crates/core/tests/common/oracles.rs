use std::f64::consts::PI;

use parksac::checkpoint::{load_checkpoint, save_checkpoint};
use parksac::config::RunConfig;
use parksac::env::{make_scenario, EnvConfig, ScenarioKind, ScenarioSpec};
use parksac::nn::{polyak_update, squashed_log_prob, GaussianPolicy, Mlp, TwinCritic, ACTION_DIM};
use parksac::planner::{plan, validate_path, PlanError, SearchConfig};
use parksac::sac::{
    critic_target_with_noise, train, Batch, EpisodeMetrics, SacConfig, TrainConfig, TrainState, Transition,
    METRICS_HEADER,
};
use parksac::seeding::{rng_for, Stream};
use parksac::sim::{rect_collision, step_kinematics, ControlInput, OrientedRect, Pose, VehicleParams, VehicleState};
use rand::Rng;

pub type Check = Result<String, String>;

/// Circle through three points, as `(center, radius)`.
fn circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> ((f64, f64), f64) {
    let d = 2.0 * (a.0 * (b.1 - c.1) + b.0 * (c.1 - a.1) + c.0 * (a.1 - b.1));
    let sq = |p: (f64, f64)| p.0 * p.0 + p.1 * p.1;
    let ux = (sq(a) * (b.1 - c.1) + sq(b) * (c.1 - a.1) + sq(c) * (a.1 - b.1)) / d;
    let uy = (sq(a) * (c.0 - b.0) + sq(b) * (a.0 - c.0) + sq(c) * (b.0 - a.0)) / d;
    ((ux, uy), (a.0 - ux).hypot(a.1 - uy))
}

fn random_params<R: Rng>(rng: &mut R) -> VehicleParams {
    let wheelbase = rng.gen_range(1.5..3.5);
    VehicleParams {
        wheelbase,
        body_length: wheelbase + rng.gen_range(0.5..2.0),
        body_width: rng.gen_range(1.4..2.2),
        max_steer: rng.gen_range(0.2..0.8),
        max_accel: rng.gen_range(0.5..3.0),
        max_speed: rng.gen_range(0.5..4.0),
    }
}

/// Constant steer at constant speed traces a circle of radius `L / |tan(steer)|`,
/// and a vehicle at rest with zero throttle never moves.
pub fn kinematics(draws: u64) -> Check {
    let dt = 0.01;
    let mut worst: f64 = 0.0;
    for k in 0..draws {
        let mut rng = rng_for(k, Stream::Init, 200);
        let p = random_params(&mut rng);
        let mag = rng.gen_range(0.05..1.0) * p.max_steer;
        let steer = if rng.gen_bool(0.5) { mag } else { -mag };
        let speed = rng.gen_range(0.2..1.0) * p.max_speed * if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
        let start = Pose::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-PI..PI));
        let expected = p.wheelbase / steer.tan().abs();

        // drive a quarter turn and fit a circle through three samples
        let u = ControlInput::new(steer, 0.0);
        let steps = ((PI / 2.0) * expected / (speed.abs() * dt)).ceil() as usize;
        let mut s = VehicleState { pose: start, v: speed };
        let mut pts = vec![(s.pose.x, s.pose.y)];
        for _ in 0..steps {
            s = step_kinematics(&s, &u, &p, dt);
            pts.push((s.pose.x, s.pose.y));
            if s.v != speed {
                return Err(format!("draw {k}: speed drifted under zero throttle"));
            }
        }
        let (_, r) = circumcircle(pts[0], pts[pts.len() / 2], pts[pts.len() - 1]);
        let err = (r - expected).abs() / expected;
        worst = worst.max(err);
        if err >= 0.01 {
            return Err(format!("draw {k}: radius {r:.4} vs {expected:.4} ({:.3}%)", 100.0 * err));
        }

        let rest = VehicleState::at_rest(start);
        let any = ControlInput::new(rng.gen_range(-p.max_steer..p.max_steer), 0.0);
        if step_kinematics(&rest, &any, &p, dt) != rest {
            return Err(format!("draw {k}: vehicle at rest moved"));
        }
    }
    Ok(format!("{draws} draws, worst radius error {:.4}%", 100.0 * worst))
}

fn shrunk(r: &OrientedRect, m: f64) -> OrientedRect {
    OrientedRect::new(r.center, (r.half_extents.0 - m, r.half_extents.1 - m), r.heading)
}

/// Point-sampling collision oracle: any grid point of `a` (boundary
/// included) inside `b`.
pub fn sampled_collision(a: &OrientedRect, b: &OrientedRect, spacing: f64) -> bool {
    let [ax, ay] = a.axes();
    let (hx, hy) = a.half_extents;
    let nx = (2.0 * hx / spacing).ceil() as usize;
    let ny = (2.0 * hy / spacing).ceil() as usize;
    for i in 0..=nx {
        let lx = -hx + 2.0 * hx * i as f64 / nx as f64;
        for j in 0..=ny {
            let ly = -hy + 2.0 * hy * j as f64 / ny as f64;
            let p = (a.center.0 + lx * ax.0 + ly * ay.0, a.center.1 + lx * ax.1 + ly * ay.1);
            if b.contains_point(p) {
                return true;
            }
        }
    }
    false
}

/// SAT against point sampling on random pairs. A disagreement is accepted
/// only when the pair is ambiguous at the sample spacing: shrinking either
/// rectangle by one spacing diagonal separates them.
pub fn collision_oracle(pairs: u64) -> Check {
    let spacing = 0.05;
    let slack = spacing * 2f64.sqrt();
    let mut rng = rng_for(0, Stream::Init, 300);
    let (mut hits, mut boundary) = (0, 0);
    for k in 0..pairs {
        let rect = |rng: &mut parksac::seeding::DetRng, spread: f64| {
            OrientedRect::new(
                (rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)),
                (rng.gen_range(0.3..2.0), rng.gen_range(0.3..1.5)),
                rng.gen_range(-PI..PI),
            )
        };
        let a = rect(&mut rng, 0.5);
        let b = rect(&mut rng, 3.5);
        let sat = rect_collision(&a, &b);
        if sat != rect_collision(&b, &a) {
            return Err(format!("pair {k}: SAT not symmetric"));
        }
        let sampled = sampled_collision(&a, &b, spacing) || sampled_collision(&b, &a, spacing);
        hits += sat as usize;
        if sat != sampled {
            let near_boundary = !rect_collision(&shrunk(&a, slack), &b) || !rect_collision(&a, &shrunk(&b, slack));
            if sampled || !near_boundary {
                return Err(format!("pair {k}: SAT {sat}, sampling {sampled}, {a:?} {b:?}"));
            }
            boundary += 1;
        }
    }
    Ok(format!("{pairs} pairs, {hits} colliding, {boundary} boundary-band disagreements"))
}

/// Histogram of policy samples against the integrated squashed density.
/// Bins tile the image of `mean ± 2.5 std` under the squash, so every bin
/// sits strictly inside the action bounds.
pub fn squashed_density(fixtures: u64, samples: usize) -> Check {
    const BINS: usize = 5;
    const SUB: usize = 24;
    let bounds = [0.6, 1.0];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for k in 0..fixtures {
        let mut rng = rng_for(k, Stream::Init, 400);
        let mut policy = GaussianPolicy::new(3, &[6], bounds, &mut rng);
        for p in policy.net.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        let obs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (mean, log_std) = policy.distribution(&obs).map_err(|e| e.to_string())?;
        let edges: Vec<Vec<f64>> = (0..ACTION_DIM)
            .map(|d| {
                let (m, s) = (mean[d], log_std[d].exp());
                (0..=BINS)
                    .map(|e| bounds[d] * (m - 2.5 * s + 5.0 * s * e as f64 / BINS as f64).tanh())
                    .collect()
            })
            .collect();
        let bin_of = |d: usize, a: f64| {
            let e = &edges[d];
            if a < e[0] || a >= e[BINS] {
                None
            } else {
                Some(e.partition_point(|&x| x <= a) - 1)
            }
        };

        let mut counts = [[0usize; BINS]; BINS];
        for _ in 0..samples {
            let (u, lp) = policy.sample(&obs, &mut rng).map_err(|e| e.to_string())?;
            let a = [u.steer, u.throttle];
            // atanh loses precision next to the bounds
            let saturated = a[0].abs() > 0.99 * bounds[0] || a[1].abs() > 0.99 * bounds[1];
            let direct = squashed_log_prob(mean, log_std, a, bounds);
            if !saturated && (lp - direct).abs() > 1e-6 * (1.0 + lp.abs()) {
                return Err(format!("fixture {k}: sample log-prob {lp} vs density {direct}"));
            }
            if let (Some(i), Some(j)) = (bin_of(0, a[0]), bin_of(1, a[1])) {
                counts[i][j] += 1;
            }
        }

        for (i, row) in counts.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                let lo = [edges[0][i], edges[1][j]];
                let hi = [edges[0][i + 1], edges[1][j + 1]];
                let mass = bin_mass(mean, log_std, bounds, lo, hi, SUB);
                // keep the sampling noise well below the tolerance
                if mass < 0.03 {
                    continue;
                }
                checked += 1;
                let emp = count as f64 / samples as f64;
                let err = (emp - mass).abs() / mass;
                worst = worst.max(err);
                if err > 0.02 {
                    return Err(format!("fixture {k} bin ({i},{j}): empirical {emp:.5} vs density {mass:.5}"));
                }
            }
        }
    }
    Ok(format!(
        "{fixtures} fixtures x {samples} samples, {checked} bins, worst bin error {:.3}%",
        100.0 * worst
    ))
}

/// Midpoint-rule integral of `exp(log_prob)` over the box `[lo, hi]`.
fn bin_mass(
    mean: [f64; ACTION_DIM],
    log_std: [f64; ACTION_DIM],
    bounds: [f64; ACTION_DIM],
    lo: [f64; ACTION_DIM],
    hi: [f64; ACTION_DIM],
    sub: usize,
) -> f64 {
    let h = [(hi[0] - lo[0]) / sub as f64, (hi[1] - lo[1]) / sub as f64];
    let mut total = 0.0;
    for a in 0..sub {
        for b in 0..sub {
            let p = [lo[0] + (a as f64 + 0.5) * h[0], lo[1] + (b as f64 + 0.5) * h[1]];
            total += squashed_log_prob(mean, log_std, p, bounds).exp();
        }
    }
    total * h[0] * h[1]
}

/// Polyak edge cases, terminal targets and the default smoothing coefficient.
pub fn polyak_and_terminal() -> Check {
    let mut rng = rng_for(0, Stream::Init, 500);
    let online: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let before: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut t = before.clone();
    polyak_update(&mut t, &online, 0.0);
    if t != before {
        return Err("tau = 0 changed the target".into());
    }
    polyak_update(&mut t, &online, 1.0);
    if t != online {
        return Err("tau = 1 did not copy the online parameters".into());
    }

    let policy = GaussianPolicy::new(3, &[5], [0.6, 1.0], &mut rng);
    let targets = TwinCritic::new(3, &[5], &mut rng);
    let ts: Vec<Transition> = (0..16)
        .map(|_| Transition {
            s: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            a: ControlInput::new(rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)),
            r: rng.gen_range(-100.0..10.0),
            s_next: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            done: true,
        })
        .collect();
    let batch = Batch::from_transitions(&ts, [0.6, 1.0]);
    let noise: Vec<f64> = (0..2 * ts.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let y = critic_target_with_noise(&batch, &policy, &targets, 0.2, 0.99, &noise);
    if y != batch.rewards {
        return Err("terminal targets differ from rewards".into());
    }

    let echo = RunConfig::default().echo_lines();
    if !echo.iter().any(|l| l == "sac.tau = 0.05") {
        return Err("default echo lacks sac.tau = 0.05".into());
    }
    Ok("tau 0/1 exact, 16 terminal targets equal r, echo tau = 0.05".into())
}

/// The published hyperparameter table, as echoed by the default config.
pub const TABLE_ONE: [&str; 6] = [
    "sac.episodes = 3000",
    "sac.timesteps = 1000",
    "sac.batch = 128",
    "sac.gamma = 0.99",
    "sac.noise_sigma = 0.01",
    "sac.tau = 0.05",
];

pub fn default_echo() -> Check {
    let echo = RunConfig::default().echo_lines();
    for want in TABLE_ONE {
        let hits = echo.iter().filter(|l| l.as_str() == want).count();
        if hits != 1 {
            return Err(format!("expected exactly one `{want}`, found {hits}"));
        }
    }
    Ok(TABLE_ONE.join(", "))
}

/// A one-hidden-layer net whose output is the constant `value`.
pub fn constant_net(input: usize, value: f64) -> Mlp {
    let mut q = Mlp::zeros(&[input, 3, 1]);
    let last = q.layers().len() - 1;
    q.bias_mut(last)[0] = value;
    q
}

/// Open lot with a straight 8 m corridor from `(-4, 0)` to `(4, 0)`.
pub fn corridor_spec() -> ScenarioSpec {
    let mut spec = make_scenario(ScenarioKind::Perpendicular, 0).expect("layout");
    spec.lot = OrientedRect::new((0.0, 0.0), (12.0, 12.0), 0.0);
    spec.target = OrientedRect::new((4.0, 0.0), (2.5, 1.25), 0.0);
    spec.obstacles = vec![
        OrientedRect::new((0.0, 2.6), (9.0, 0.5), 0.0),
        OrientedRect::new((0.0, -2.6), (9.0, 0.5), 0.0),
    ];
    spec.moving.clear();
    spec
}

/// Goal spot fenced in on all sides.
pub fn blocked_goal_spec() -> ScenarioSpec {
    let mut spec = corridor_spec();
    spec.obstacles = vec![
        OrientedRect::new((4.0, 2.3), (3.5, 0.3), 0.0),
        OrientedRect::new((4.0, -2.3), (3.5, 0.3), 0.0),
        OrientedRect::new((0.8, 0.0), (0.3, 2.0), 0.0),
        OrientedRect::new((7.2, 0.0), (0.3, 2.0), 0.0),
    ];
    spec
}

/// Returned paths validate, a fenced goal is unreachable, and the corridor
/// path stays within 15% of the straight-line distance.
pub fn planner_soundness(layouts_per_kind: u64) -> Check {
    let params = VehicleParams::default();
    let cfg = SearchConfig::default();

    let corridor = corridor_spec();
    let start = Pose::new(-4.0, 0.0, 0.0);
    let r = plan(&corridor, &start, &params, &cfg).map_err(|e| format!("corridor: {e}"))?;
    if !validate_path(&r.path, &corridor, &params, cfg.check_spacing) {
        return Err("corridor path fails validation".into());
    }
    let ratio = r.length() / 8.0;
    if (ratio - 1.0).abs() > 0.15 {
        return Err(format!("corridor path length {:.3} vs 8 m", r.length()));
    }

    let blocked = blocked_goal_spec();
    let small = SearchConfig {
        max_expansions: 20_000,
        ..cfg.clone()
    };
    match plan(&blocked, &start, &params, &small) {
        Err(PlanError::NoPath { .. }) => {}
        other => return Err(format!("fenced goal: expected NoPath, got {other:?}")),
    }

    let mut validated = 1;
    for kind in ScenarioKind::ALL {
        for seed in 0..layouts_per_kind {
            let spec = make_scenario(kind, seed).map_err(|e| e.to_string())?;
            let s = spec.sample_start(0, &params).map_err(|e| e.to_string())?;
            if let Ok(r) = plan(&spec, &s.pose, &params, &cfg) {
                if !validate_path(&r.path, &spec, &params, cfg.check_spacing) {
                    return Err(format!("{} layout {seed}: path fails validation", kind.as_str()));
                }
                validated += 1;
            }
        }
    }
    Ok(format!(
        "corridor length ratio {ratio:.3}, fenced goal NoPath, {validated} returned paths validated"
    ))
}

/// A training config small enough to run in seconds.
pub fn tiny_train_config(episodes: usize) -> TrainConfig {
    let sac = SacConfig {
        episodes,
        max_steps: 40,
        batch_size: 16,
        warmup_steps: 60,
        hidden: vec![16, 16],
        buffer_capacity: 5000,
        seed: 3,
        ..SacConfig::default()
    };
    TrainConfig::new(sac, EnvConfig::default(), ScenarioKind::Perpendicular)
}

fn metrics_csv(rows: &[EpisodeMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in rows {
        out.push_str(&m.csv_row());
        out.push('\n');
    }
    out
}

/// Identical runs give identical metrics, and 10 episodes, a checkpoint
/// round trip, then 10 more episodes reproduce a straight 20-episode run.
pub fn reproducibility(dir: &std::path::Path) -> Check {
    let mut none = |_: &TrainState, _: &EpisodeMetrics| Ok(());
    let full = train(&tiny_train_config(20), None, &mut none).map_err(|e| e.to_string())?;
    let again = train(&tiny_train_config(20), None, &mut none).map_err(|e| e.to_string())?;
    let csv = metrics_csv(&full.metrics);
    if csv != metrics_csv(&again.metrics) {
        return Err("two identical runs wrote different metrics".into());
    }

    let first = train(&tiny_train_config(10), None, &mut none).map_err(|e| e.to_string())?;
    if first.state.updates == 0 || full.state.updates <= first.state.updates {
        return Err("fixture too small: no gradient updates on both sides of the split".into());
    }
    let path = dir.join("half.ckpt");
    let echo = vec!["sac.seed = 3".to_string()];
    save_checkpoint(&path, &first.state, &echo).map_err(|e| e.to_string())?;
    let loaded = load_checkpoint(&path).map_err(|e| e.to_string())?;
    if loaded.state != first.state || loaded.config_echo != echo {
        return Err("checkpoint round trip changed the state".into());
    }
    let second = train(&tiny_train_config(20), Some(loaded.state), &mut none).map_err(|e| e.to_string())?;
    let mut joined = first.metrics.clone();
    joined.extend(second.metrics.iter().copied());
    if metrics_csv(&joined) != csv {
        return Err("resumed metrics differ from the uninterrupted run".into());
    }
    if second.state != full.state {
        return Err("resumed training state differs from the uninterrupted run".into());
    }
    Ok(format!(
        "20-episode metrics identical across runs; 10+10 resume matches 20 ({} updates)",
        full.state.updates
    ))
}
