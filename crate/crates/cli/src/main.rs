//! `navtune`: generate environments, train a parameter policy, evaluate it
//! against fixed parameters, and inspect single planner decisions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use navtune_core::eval::{trials_csv, write_report, ActorPolicy};
use navtune_core::meta_env::{read_trajectory, write_trajectory, FixedPolicy};
use navtune_core::nav::NavWorld;
use navtune_core::sim::check_collision;
use navtune_core::trainer::load_policy;
use navtune_core::{
    build_report, build_suite, run_trials, train, Config, Method, NavStack, OccupancyGrid, PlannerParams, Pose2D, Split, Suite, TrainSetup, Twist,
};

#[derive(Parser)]
#[command(name = "navtune", version, about = "Learn planner parameter policies for a DWA navigation stack")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flat `key = value` config file; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.workers=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::read(p)?,
            None => Config::default(),
        };
        for o in &self.overrides {
            let (k, v) = o.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {o:?}"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded suite of cellular-automaton worlds.
    GenEnvs {
        #[command(flatten)]
        common: Common,
        /// Number of environments (default: ca.suite_size).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a parameter policy on the training split of a suite.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        suite: PathBuf,
        /// Run directory for checkpoints, metrics and the final policy.
        #[arg(long)]
        run_dir: PathBuf,
        /// Continue from `<run-dir>/checkpoint.bin`.
        #[arg(long)]
        resume: bool,
    },
    /// Compare a trained policy against fixed parameters.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        suite: PathBuf,
        /// Policy file or checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Flat params file for the baseline (default: midpoint parameters).
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        jitter: Option<f64>,
        /// Which environments to evaluate: train, test or all.
        #[arg(long, default_value = "all")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one planner cycle and print the decision as JSON.
    PlanOnce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: PathBuf,
        /// `x,y,heading`
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        pose: [f64; 3],
        /// `x,y`
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        goal: [f64; 2],
        /// Current velocity `linear,angular`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, default_value = "0,0")]
        twist: [f64; 2],
        /// Flat params file (default: midpoint parameters).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Render a trajectory log over its grid as an annotated text map.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gen_envs(common: &Common, n: Option<usize>, out: &Path) -> Result<()> {
    let cfg = common.load()?;
    let n = n.unwrap_or(cfg.suite_size);
    let suite = build_suite(common.seed, n, &cfg.ca, cfg.env.resolution, &cfg.env.robot)?;
    navtune_core::envgen::write_suite(&suite, out)?;
    let hash = navtune_core::envgen::hash_suite_dir(out)?;
    println!("wrote {} train + {} test environments to {}", suite.train.len(), suite.test.len(), out.display());
    println!("suite sha256 {hash}");
    Ok(())
}

fn run_train(common: &Common, suite_dir: &Path, run_dir: &Path, resume: bool) -> Result<()> {
    let cfg = common.load()?;
    let suite = navtune_core::envgen::read_suite(suite_dir)?;
    let envs = suite.train_envs();
    std::fs::create_dir_all(run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    write(&run_dir.join("config.txt"), &cfg.to_flat())?;
    write(&run_dir.join("seed.txt"), &format!("{}\n", common.seed))?;
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        ctrlc::set_handler(move || {
            eprintln!("interrupt received, writing checkpoint");
            stop.store(true, Ordering::SeqCst);
        })
        .context("installing the interrupt handler")?;
    }
    let checkpoint = run_dir.join(navtune_core::trainer::CHECKPOINT_FILE);
    if resume && !checkpoint.exists() {
        bail!("--resume given but {} does not exist", checkpoint.display());
    }
    let setup = TrainSetup {
        suite: &envs,
        env: cfg.env,
        td3: cfg.td3.clone(),
        train: cfg.train,
        seed: common.seed,
        run_dir: run_dir.to_path_buf(),
        resume: resume.then_some(checkpoint),
        stop: Some(stop),
    };
    info!("training on {} environments", envs.len());
    let out = train(&setup)?;
    println!(
        "{} steps, {} updates, {} episodes in {:.1} s{}",
        out.env_steps,
        out.updates,
        out.episodes,
        out.wall_seconds,
        if out.interrupted { " (interrupted; continue with --resume)" } else { "" }
    );
    Ok(())
}

fn select(suite: &Suite, split: &str) -> Result<Vec<usize>> {
    let mut v = match split {
        "train" => suite.train.clone(),
        "test" => suite.test.clone(),
        "all" => suite.envs.iter().map(|e| e.index).collect(),
        other => bail!("--split must be train, test or all, not {other:?}"),
    };
    v.sort_unstable();
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    common: &Common,
    suite_dir: &Path,
    checkpoint: &Path,
    baseline: Option<&Path>,
    trials: Option<usize>,
    alpha: Option<f64>,
    jitter: Option<f64>,
    split: &str,
    out: &Path,
) -> Result<()> {
    let mut cfg = common.load()?;
    cfg.eval.trials = trials.unwrap_or(cfg.eval.trials);
    cfg.eval.alpha = alpha.unwrap_or(cfg.eval.alpha);
    cfg.eval.jitter = jitter.unwrap_or(cfg.eval.jitter);
    cfg.eval.validate()?;
    let suite = navtune_core::envgen::read_suite(suite_dir)?;
    let actor = load_policy(checkpoint)?;
    let defaults = cfg.env.dwa.bounds.defaults();
    let fixed = match baseline {
        Some(p) => PlannerParams::read(p, &defaults)?,
        None => defaults,
    };
    fixed.validate(&cfg.env.dwa.bounds)?;
    let profiles = out.join("profiles");
    std::fs::create_dir_all(&profiles).with_context(|| format!("creating {}", profiles.display()))?;
    let ev = cfg.eval;
    let (mut base, mut learned) = (Vec::new(), Vec::new());
    let mut splits: BTreeMap<usize, Split> = BTreeMap::new();
    for index in select(&suite, split)? {
        let spec = suite.env(index).with_context(|| format!("environment {index} missing from suite"))?;
        let (b, _) = run_trials(spec, &cfg.env, Method::Fixed, &mut FixedPolicy(fixed), ev.trials, ev.jitter, common.seed)?;
        let (l, runs) = run_trials(spec, &cfg.env, Method::Learned, &mut ActorPolicy(&actor), ev.trials, ev.jitter, common.seed)?;
        write_trajectory(&profiles.join(format!("{index:03}.csv")), &runs[0].records)?;
        info!("env {index}: fixed {:?} learned {:?}", b.mean(), l.mean());
        splits.insert(index, suite.split_of(index));
        base.push(b);
        learned.push(l);
    }
    let mut all = base.clone();
    all.extend(learned.iter().cloned());
    write(&out.join("trials.csv"), &trials_csv(&all))?;
    let report = build_report(&base, &learned, &splits, ev.alpha)?;
    write_report(out, &report)?;
    if let Some(a) = report.aggregate(None, None) {
        println!(
            "{} envs: fixed {:.3} s, learned {:.3} s ({:+.2}%)",
            a.envs,
            a.baseline_mean,
            a.learned_mean,
            a.improvement_pct()
        );
    }
    println!(
        "significantly better: learned {}, fixed {}",
        report.count(navtune_core::eval::Verdict::LearnedBetter, None, None),
        report.count(navtune_core::eval::Verdict::BaselineBetter, None, None)
    );
    Ok(())
}

fn plan_once(common: &Common, grid: &Path, pose: [f64; 3], goal: [f64; 2], twist: [f64; 2], params: Option<&Path>) -> Result<()> {
    let cfg = common.load()?;
    let grid = OccupancyGrid::read(grid)?;
    let defaults = cfg.env.dwa.bounds.defaults();
    let params = match params {
        Some(p) => PlannerParams::read(p, &defaults)?,
        None => defaults,
    };
    params.validate(&cfg.env.dwa.bounds)?;
    let world = Arc::new(NavWorld::new(grid, &cfg.env.robot));
    let mut stack = NavStack::new(world, goal, cfg.env.robot, cfg.env.dwa, cfg.env.physics_dt);
    let pose = Pose2D::new(pose[0], pose[1], pose[2]);
    stack.replan(pose)?;
    let out = stack.step(pose, Twist::new(twist[0], twist[1]), &params)?;
    println!("{}", serde_json::to_string(&out.decision)?);
    Ok(())
}

/// Text map, top row first: `#` occupied, `.` free, `S` start, `G` final
/// pose, `*` decision poses, `!` poses in collision. A per-decision table
/// follows the map.
fn replay(common: &Common, trajectory: &Path, grid: &Path, out: &Path) -> Result<()> {
    let cfg = common.load()?;
    let grid = OccupancyGrid::read(grid)?;
    let records = read_trajectory(trajectory)?;
    if records.is_empty() {
        bail!("{} has no decisions", trajectory.display());
    }
    let (w, h) = (grid.width(), grid.height());
    let mut canvas: Vec<Vec<u8>> = (0..h).map(|j| (0..w).map(|i| if grid.occupied(i, j) { b'#' } else { b'.' }).collect()).collect();
    let mut table = String::from("# decision_index,sim_time_s,x,y,cell_i,cell_j,collision\n");
    let mut collisions = 0;
    for (k, r) in records.iter().enumerate() {
        let hit = check_collision(&grid, r.pose, &cfg.env.robot);
        collisions += usize::from(hit);
        let cell = grid.cell_of(r.pose.x, r.pose.y);
        if let Some((i, j)) = cell {
            canvas[j][i] = if hit {
                b'!'
            } else if k == 0 {
                b'S'
            } else if k + 1 == records.len() {
                b'G'
            } else {
                b'*'
            };
        }
        let (ci, cj) = cell.map(|(i, j)| (i as i64, j as i64)).unwrap_or((-1, -1));
        let _ = writeln!(table, "# {},{},{},{},{ci},{cj},{}", r.decision_index, r.sim_time, r.pose.x, r.pose.y, u8::from(hit));
    }
    let last = records.last().expect("non-empty");
    let mut text = format!(
        "# {} decisions, {} s simulated, {} in collision, final pose ({:.3}, {:.3})\n",
        records.len(),
        last.sim_time,
        collisions,
        last.pose.x,
        last.pose.y
    );
    for row in canvas.iter().rev() {
        text.push_str(std::str::from_utf8(row).expect("ascii"));
        text.push('\n');
    }
    text.push_str(&table);
    write(out, &text)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenEnvs { common, n, out } => gen_envs(&common, n, &out),
        Command::Train {
            common,
            suite,
            run_dir,
            resume,
        } => run_train(&common, &suite, &run_dir, resume),
        Command::Evaluate {
            common,
            suite,
            checkpoint,
            baseline,
            trials,
            alpha,
            jitter,
            split,
            out,
        } => evaluate(&common, &suite, &checkpoint, baseline.as_deref(), trials, alpha, jitter, &split, &out),
        Command::PlanOnce {
            common,
            grid,
            pose,
            goal,
            twist,
            params,
        } => plan_once(&common, &grid, pose, goal, twist, params.as_deref()),
        Command::Replay {
            common,
            trajectory,
            grid,
            out,
        } => replay(&common, &trajectory, &grid, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let missing = matches!(e.kind(), clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand);
            let _ = e.print();
            return ExitCode::from(if missing { 1 } else { code });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
