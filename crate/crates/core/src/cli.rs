//! The `parksac` command line: train, eval, bench, render and plan.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 I/O or corrupt file,
//! 3 planning failure or an evaluation below its required threshold.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::RunConfig;
use crate::env::{read_trajectory_csv, write_trajectory_csv, ParkingEnv, ScenarioKind, ScenarioSpec, TrajectoryRow};
use crate::error::{Error, Result};
use crate::output::write_atomic;
use crate::planner::{path_rows, plan, PlanError};
use crate::render::render_svg;
use crate::sac::{
    evaluate, evaluation_scenario, run_episode, train, DeterministicPolicy, EvalReport, TrainState, METRICS_HEADER,
};

#[derive(Debug, Parser)]
#[command(name = "parksac", version, about = "Learning-based parking: SAC training, evaluation and a Hybrid A* baseline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// INI config file (built-in defaults < file < flags).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. `--set sac.gamma=0.98`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scenario kind: parallel, perpendicular or mixed.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Worker threads for evaluation episodes.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a SAC policy; writes metrics.csv, checkpoints and config.ini.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        episodes: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint's deterministic policy on held-out layouts.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of episodes (defaults to eval.episodes).
        #[arg(short = 'n', long)]
        episodes: Option<usize>,
        /// Write one trajectory CSV per episode into this directory.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Exit with status 3 if the success rate falls below this.
        #[arg(long)]
        min_success: Option<f64>,
    },
    /// Planning-time comparison: Hybrid A* planning vs SAC policy rollout.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Policy to time; a freshly initialized one if omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Repetitions per case.
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// Comma-separated scenario kinds, one case each.
        #[arg(long, default_value = "parallel,perpendicular,mixed")]
        cases: String,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Render a trajectory CSV over its scenario as SVG.
    Render {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Trajectory CSV; omit to draw the scene only.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Held-out episode index whose layout to draw (with --seed as the
        /// evaluation seed).
        #[arg(long, default_value_t = 0)]
        episode: u64,
        /// Draw the layout `make_scenario(kind, N)` instead.
        #[arg(long)]
        layout_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single Hybrid A* query on a held-out layout.
    Plan {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        episode: u64,
        #[arg(long)]
        layout_seed: Option<u64>,
        /// Write the path as a trajectory CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render the path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(base: RunConfig, a: &ConfigArgs) -> Result<RunConfig> {
    let mut c = base;
    if let Some(p) = &a.config {
        c.load_file(p)?;
    }
    for o in &a.overrides {
        c.set_override(o)?;
    }
    if let Some(s) = a.seed {
        c.sac.seed = s;
    }
    if let Some(k) = &a.scenario {
        c.set("scenario", "kind", k)?;
    }
    if let Some(j) = a.jobs {
        c.eval.jobs = j;
    }
    c.validate()?;
    Ok(c)
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train {
            cfg,
            episodes,
            out,
            resume,
        } => cmd_train(&cfg, episodes, out, resume.as_deref()),
        Command::Eval {
            cfg,
            checkpoint,
            episodes,
            trajectories,
            min_success,
        } => cmd_eval(&cfg, &checkpoint, episodes, trajectories.as_deref(), min_success),
        Command::Bench {
            cfg,
            checkpoint,
            runs,
            cases,
            csv,
        } => cmd_bench(&cfg, checkpoint.as_deref(), runs, &cases, csv.as_deref()),
        Command::Render {
            cfg,
            trajectory,
            episode,
            layout_seed,
            out,
        } => cmd_render(&cfg, trajectory.as_deref(), episode, layout_seed, &out),
        Command::Plan {
            cfg,
            episode,
            layout_seed,
            out,
            svg,
        } => cmd_plan(&cfg, episode, layout_seed, out.as_deref(), svg.as_deref()),
    }
}

fn checkpoint_name(episodes: u64) -> String {
    format!("ckpt_{episodes:06}.ckpt")
}

/// Rows of an existing metrics file for episodes before `upto`, so a resumed
/// run continues the same log.
fn previous_metrics(path: &Path, upto: u64) -> Result<Vec<String>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let ep: u64 = line
            .split(',')
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                msg: format!("bad metrics row in {}", path.display()),
            })?;
        if ep < upto {
            rows.push(line.to_string());
        }
    }
    Ok(rows)
}

fn metrics_text(rows: &[String]) -> String {
    let mut s = String::with_capacity(rows.len() * 96);
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

fn cmd_train(a: &ConfigArgs, episodes: Option<usize>, out: Option<PathBuf>, resume: Option<&Path>) -> Result<i32> {
    // precedence: defaults < checkpoint echo < file < flags
    let (base, state) = match resume {
        Some(p) => {
            let ck = load_checkpoint(p)?;
            let mut base = RunConfig::from_echo_lines(&ck.config_echo)?;
            // continue next to the checkpoint unless told otherwise
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                base.out_dir = parent.to_path_buf();
            }
            (base, Some(ck.state))
        }
        None => (RunConfig::default(), None),
    };
    let mut cfg = resolve(base, a)?;
    if let Some(n) = episodes {
        cfg.sac.episodes = n;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    write_atomic(&dir.join("config.ini"), cfg.to_ini().as_bytes())?;

    let start_episode = state.as_ref().map_or(0, |s| s.episodes);
    let metrics_path = dir.join("metrics.csv");
    let mut rows = if resume.is_some() {
        previous_metrics(&metrics_path, start_episode)?
    } else {
        Vec::new()
    };
    write_atomic(&metrics_path, metrics_text(&rows).as_bytes())?;

    let echo = cfg.echo_lines();
    let every = cfg.sac.checkpoint_every as u64;
    let tc = cfg.train_config();
    let started = Instant::now();
    let outcome = train(&tc, state, &mut |st: &TrainState, m| {
        rows.push(m.csv_row());
        if every > 0 && st.episodes % every == 0 {
            write_atomic(&metrics_path, metrics_text(&rows).as_bytes())?;
            save_checkpoint(&dir.join(checkpoint_name(st.episodes)), st, &echo)?;
            eprintln!(
                "episode {}: env steps {}, alpha {:.4}, {:.0}s",
                st.episodes,
                st.env_steps,
                st.alpha(),
                started.elapsed().as_secs_f64()
            );
        }
        Ok(())
    })?;
    write_atomic(&metrics_path, metrics_text(&rows).as_bytes())?;
    save_checkpoint(&dir.join("final.ckpt"), &outcome.state, &echo)?;
    for (ep, r) in &outcome.evals {
        eprintln!(
            "validation after {ep} episodes: success {:.2}, collision {:.2}",
            r.success_rate, r.collision_rate
        );
    }
    println!(
        "trained {} episodes ({} env steps){} -> {}",
        outcome.state.episodes,
        outcome.state.env_steps,
        if outcome.stopped_early { ", stopped early" } else { "" },
        dir.display()
    );
    Ok(0)
}

fn print_report(kind: ScenarioKind, r: &EvalReport) {
    println!("scenario            {kind}");
    println!("episodes            {}", r.episodes);
    println!("success rate        {:.3}", r.success_rate);
    println!("collision rate      {:.3}", r.collision_rate);
    println!("mean steps          {:.1}", r.mean_episode_steps);
    println!("mean return         {:.3}", r.mean_return);
    println!("mean final dist     {:.3}", r.mean_final_dist);
    println!("mean rollout time   {:.6} s", r.mean_inference_time_per_episode);
    println!("{}", EvalReport::CSV_HEADER);
    println!("{}", r.csv_row());
}

fn cmd_eval(
    a: &ConfigArgs,
    checkpoint: &Path,
    episodes: Option<usize>,
    trajectories: Option<&Path>,
    min_success: Option<f64>,
) -> Result<i32> {
    let ck = load_checkpoint(checkpoint)?;
    let base = RunConfig::from_echo_lines(&ck.config_echo)?;
    // evaluation seed and episode count are independent of the training seed
    let mut cfg = resolve(base, &ConfigArgs { seed: None, ..a.clone() })?;
    if let Some(s) = a.seed {
        cfg.eval.seed = s;
    }
    if let Some(n) = episodes {
        cfg.eval.episodes = n;
    }
    cfg.validate()?;
    let mut setup = cfg.eval_setup(cfg.scenario);
    setup.record_trajectories = trajectories.is_some();
    let report = evaluate(&ck.state.policy, &setup, cfg.eval.episodes, cfg.eval.seed)?;
    if let Some(dir) = trajectories {
        for (i, o) in report.outcomes.iter().enumerate() {
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, o.trajectory.as_deref().unwrap_or(&[]))?;
            write_atomic(&dir.join(format!("episode_{i:04}.csv")), &buf)?;
        }
    }
    print_report(cfg.scenario, &report);
    if let Some(th) = min_success {
        if report.success_rate < th {
            eprintln!("success rate {:.3} below required {th}", report.success_rate);
            return Ok(3);
        }
    }
    Ok(0)
}

/// Median and interquartile range (linear interpolation between order
/// statistics).
pub fn median_iqr(samples: &[f64]) -> (f64, f64) {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    (q(0.5), q(0.75) - q(0.25))
}

/// One timed case of the benchmark.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub kind: ScenarioKind,
    pub planner_times: Vec<f64>,
    pub planner_error: Option<PlanError>,
    pub rollout_times: Vec<f64>,
    pub rollout_success: bool,
}

/// Time Hybrid A* planning and policy rollout on the first held-out layout
/// of each kind, `runs` times each.
pub fn bench_cases(cfg: &RunConfig, state: &TrainState, kinds: &[ScenarioKind], runs: usize) -> Result<Vec<BenchCase>> {
    let mut out = Vec::new();
    for &kind in kinds {
        let spec = evaluation_scenario(kind, &cfg.scenario_options(), cfg.eval.seed, 0)?;
        let setup = cfg.eval_setup(kind);
        let start = spec.sample_start(0, &cfg.env.vehicle)?;
        let mut planner_times = Vec::with_capacity(runs);
        let mut planner_error = None;
        let mut rollout_times = Vec::with_capacity(runs);
        let mut rollout_success = false;
        for _ in 0..runs {
            let t = Instant::now();
            let r = plan(&spec, &start.pose, &cfg.env.vehicle, &cfg.search);
            planner_times.push(t.elapsed().as_secs_f64());
            planner_error = r.err();

            let mut env = ParkingEnv::new(spec.clone(), setup.env.clone())?;
            let o = run_episode(&mut env, &mut DeterministicPolicy(&state.policy), 0, false)?;
            rollout_times.push(o.elapsed.as_secs_f64());
            rollout_success = o.success;
        }
        out.push(BenchCase {
            kind,
            planner_times,
            planner_error,
            rollout_times,
            rollout_success,
        });
    }
    Ok(out)
}

/// Methods as rows, cases as columns.
pub fn bench_table(cases: &[BenchCase]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<16}", "method");
    for (i, c) in cases.iter().enumerate() {
        let _ = write!(s, " | {:<34}", format!("case {} ({})", i + 1, c.kind));
    }
    s.push('\n');
    let cell = |times: &[f64], note: &str| {
        let (m, iqr) = median_iqr(times);
        format!("{:.6} s (IQR {:.6}){note}", m, iqr)
    };
    let _ = write!(s, "{:<16}", "Hybrid A*");
    for c in cases {
        let note = if c.planner_error.is_some() { " NoPath" } else { "" };
        let _ = write!(s, " | {:<34}", cell(&c.planner_times, note));
    }
    s.push('\n');
    let _ = write!(s, "{:<16}", "SAC rollout");
    for c in cases {
        let note = if c.rollout_success { "" } else { " unparked" };
        let _ = write!(s, " | {:<34}", cell(&c.rollout_times, note));
    }
    s.push('\n');
    s
}

fn bench_csv(cases: &[BenchCase]) -> String {
    let mut s = String::from("method,case,kind,median_s,iqr_s,runs,note\n");
    for (i, c) in cases.iter().enumerate() {
        let (m, iqr) = median_iqr(&c.planner_times);
        let note = c.planner_error.as_ref().map_or(String::new(), |e| e.to_string());
        let _ = writeln!(s, "hybrid_astar,{},{},{m},{iqr},{},{note}", i + 1, c.kind, c.planner_times.len());
        let (m, iqr) = median_iqr(&c.rollout_times);
        let note = if c.rollout_success { "parked" } else { "not parked" };
        let _ = writeln!(s, "sac_rollout,{},{},{m},{iqr},{},{note}", i + 1, c.kind, c.rollout_times.len());
    }
    s
}

fn cmd_bench(a: &ConfigArgs, checkpoint: Option<&Path>, runs: usize, cases: &str, csv: Option<&Path>) -> Result<i32> {
    if runs == 0 {
        return Err(Error::config("runs", "must be at least 1"));
    }
    let (base, state) = match checkpoint {
        Some(p) => {
            let ck = load_checkpoint(p)?;
            (RunConfig::from_echo_lines(&ck.config_echo)?, Some(ck.state))
        }
        None => (RunConfig::default(), None),
    };
    let mut cfg = resolve(base, &ConfigArgs { seed: None, ..a.clone() })?;
    if let Some(s) = a.seed {
        cfg.eval.seed = s;
    }
    let state = match state {
        Some(s) => s,
        None => {
            eprintln!("no checkpoint given: timing a freshly initialized policy");
            let tc = cfg.train_config();
            TrainState::new(&cfg.sac, tc.training_env().obs_dim(), tc.bounds())
        }
    };
    let kinds = cases
        .split(',')
        .map(|k| k.trim().parse::<ScenarioKind>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::config("cases", e.to_string()))?;
    let results = bench_cases(&cfg, &state, &kinds, runs)?;
    print!("{}", bench_table(&results));
    if let Some(p) = csv {
        write_atomic(p, bench_csv(&results).as_bytes())?;
    }
    Ok(0)
}

fn scene(cfg: &RunConfig, episode: u64, layout_seed: Option<u64>) -> Result<ScenarioSpec> {
    Ok(match layout_seed {
        Some(s) => crate::env::make_scenario_with(cfg.scenario, s, &cfg.scenario_options())?,
        None => evaluation_scenario(cfg.scenario, &cfg.scenario_options(), cfg.eval.seed, episode)?,
    })
}

fn eval_seeded(a: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = resolve(RunConfig::default(), &ConfigArgs { seed: None, ..a.clone() })?;
    if let Some(s) = a.seed {
        cfg.eval.seed = s;
    }
    Ok(cfg)
}

fn cmd_render(
    a: &ConfigArgs,
    trajectory: Option<&Path>,
    episode: u64,
    layout_seed: Option<u64>,
    out: &Path,
) -> Result<i32> {
    let cfg = eval_seeded(a)?;
    let spec = scene(&cfg, episode, layout_seed)?;
    let rows: Vec<TrajectoryRow> = match trajectory {
        Some(p) => read_trajectory_csv(fs::File::open(p)?)?,
        None => Vec::new(),
    };
    write_atomic(out, render_svg(&spec, &rows, &cfg.env.vehicle).as_bytes())?;
    Ok(0)
}

fn cmd_plan(
    a: &ConfigArgs,
    episode: u64,
    layout_seed: Option<u64>,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> Result<i32> {
    let cfg = eval_seeded(a)?;
    let spec = scene(&cfg, episode, layout_seed)?;
    let start = spec.sample_start(episode, &cfg.env.vehicle)?;
    let r = plan(&spec, &start.pose, &cfg.env.vehicle, &cfg.search)?;
    println!(
        "path: {} poses, length {:.2} m, cost {:.3}, {} expansions, {:.6} s",
        r.path.len(),
        r.length(),
        r.cost,
        r.expansions,
        duration_secs(r.planning_time)
    );
    let rows = path_rows(&r.path);
    if let Some(p) = out {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rows)?;
        write_atomic(p, &buf)?;
    }
    if let Some(p) = svg {
        write_atomic(p, render_svg(&spec, &rows, &cfg.env.vehicle).as_bytes())?;
    }
    Ok(0)
}

fn duration_secs(d: Duration) -> f64 {
    d.as_secs_f64()
}
