//! Flat `key = value` configuration covering every tunable constant.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::envgen::CaConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::meta_env::MetaEnvConfig;
use crate::nav::PARAM_NAMES;
use crate::td3::Td3Config;
use crate::trainer::TrainConfig;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Split a flat document into entries. Blank lines and `#` comments are
/// skipped; a repeated key is an error.
pub fn parse_flat(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let (key, value) = (k.trim(), v.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if out.iter().any(|e| e.key == key) {
            return Err(Error::Config(format!("line {}: duplicate key {key}", n + 1)));
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: n + 1,
        });
    }
    Ok(out)
}

/// Every module's settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub env: MetaEnvConfig,
    pub ca: CaConfig,
    /// Environments per generated suite.
    pub suite_size: usize,
    pub td3: Td3Config,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            env: MetaEnvConfig::default(),
            ca: CaConfig::default(),
            suite_size: 300,
            td3: Td3Config::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl Config {
    pub fn from_flat(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for e in parse_flat(text)? {
            cfg.set(&e.key, &e.value)
                .map_err(|err| Error::Config(format!("line {}: {}", e.line, err.to_string().trim_start_matches("invalid config: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_flat(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ca.validate(self.env.resolution)?;
        self.td3.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.suite_size < 2 {
            return Err(Error::Config("ca.suite_size must be at least 2".into()));
        }
        Ok(())
    }

    /// Assign one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let e = &mut self.env;
        if let Some(name) = key.strip_prefix("dwa.bounds.") {
            let slot = PARAM_NAMES
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| Error::Config(format!("unknown key {key}")))?;
            let pair: Vec<f64> = parse_list(key, v)?;
            if pair.len() != 2 {
                return Err(Error::Config(format!("{key}: expected `lo, hi`")));
            }
            e.dwa.bounds.ranges[slot] = (pair[0], pair[1]);
            return Ok(());
        }
        match key {
            "sim.footprint_radius" => e.robot.footprint_radius = parse(key, v)?,
            "sim.max_linear_accel" => e.robot.max_linear_accel = parse(key, v)?,
            "sim.max_angular_accel" => e.robot.max_angular_accel = parse(key, v)?,
            "sim.max_linear" => e.robot.max_linear = parse(key, v)?,
            "sim.max_angular" => e.robot.max_angular = parse(key, v)?,
            "sim.resolution" => e.resolution = parse(key, v)?,
            "sim.physics_dt" => e.physics_dt = parse(key, v)?,
            "sim.decision_period" => e.decision_period = parse(key, v)?,
            "sim.goal_tolerance" => e.goal_tolerance = parse(key, v)?,
            "sim.timeout_steps" => e.timeout_steps = parse(key, v)?,
            "sim.terminal_on_collision" => e.terminal_on_collision = parse_bool(key, v)?,
            "ca.fill_probability" => self.ca.fill_probability = parse(key, v)?,
            "ca.smoothing_iterations" => self.ca.smoothing_iterations = parse(key, v)?,
            "ca.birth_threshold" => self.ca.birth_threshold = parse(key, v)?,
            "ca.survive_threshold" => self.ca.survive_threshold = parse(key, v)?,
            "ca.world_width" => self.ca.world_width = parse(key, v)?,
            "ca.world_height" => self.ca.world_height = parse(key, v)?,
            "ca.cell_size" => self.ca.cell_size = parse(key, v)?,
            "ca.clear_radius" => self.ca.clear_radius = parse(key, v)?,
            "ca.max_retries" => self.ca.max_retries = parse(key, v)?,
            "ca.suite_size" => self.suite_size = parse(key, v)?,
            "dwa.horizon" => e.dwa.horizon = parse(key, v)?,
            "dwa.min_vel_x" => e.dwa.min_vel_x = parse(key, v)?,
            "dwa.planner_rate" => e.dwa.planner_rate = parse(key, v)?,
            "dwa.window" => e.dwa.window = parse(key, v)?,
            "dwa.inflation_decay" => e.dwa.inflation_decay = parse(key, v)?,
            "dwa.state_lookahead" => e.dwa.state_lookahead = parse(key, v)?,
            "dwa.goal_lookahead" => e.dwa.goal_lookahead = parse(key, v)?,
            "dwa.recovery_fraction" => e.dwa.recovery_fraction = parse(key, v)?,
            "dwa.tie_tolerance" => e.dwa.tie_tolerance = parse(key, v)?,
            "reward.c_f" => e.reward.c_f = parse(key, v)?,
            "reward.c_p" => e.reward.c_p = parse(key, v)?,
            "reward.c_c" => e.reward.c_c = parse(key, v)?,
            "reward.use_y_axis_progress" => e.reward.use_y_axis_progress = parse_bool(key, v)?,
            "reward.per_tick_min_scan" => e.reward.per_tick_min_scan = parse_bool(key, v)?,
            "td3.gamma" => self.td3.gamma = parse(key, v)?,
            "td3.actor_lr" => self.td3.actor_lr = parse(key, v)?,
            "td3.critic_lr" => self.td3.critic_lr = parse(key, v)?,
            "td3.batch_size" => self.td3.batch_size = parse(key, v)?,
            "td3.policy_delay" => self.td3.policy_delay = parse(key, v)?,
            "td3.tau" => self.td3.tau = parse(key, v)?,
            "td3.target_noise" => self.td3.target_noise = parse(key, v)?,
            "td3.noise_clip" => self.td3.noise_clip = parse(key, v)?,
            "td3.target_smoothing" => self.td3.target_smoothing = parse_bool(key, v)?,
            "td3.warmup" => self.td3.warmup = parse(key, v)?,
            "td3.buffer_capacity" => self.td3.buffer_capacity = parse(key, v)?,
            "td3.hidden" => self.td3.hidden = parse_list(key, v)?,
            "td3.final_layer_scale" => self.td3.final_layer_scale = parse(key, v)?,
            "td3.noise_initial" => self.td3.noise.initial = parse(key, v)?,
            "td3.noise_decay_per_million" => self.td3.noise.decay_per_million = parse(key, v)?,
            "td3.noise_floor" => self.td3.noise.floor = parse(key, v)?,
            "train.workers" => self.train.workers = parse(key, v)?,
            "train.total_steps" => self.train.total_steps = parse(key, v)?,
            "train.utd" => self.train.utd = parse(key, v)?,
            "train.sync_interval" => self.train.sync_interval = parse(key, v)?,
            "train.checkpoint_interval" => self.train.checkpoint_interval = parse(key, v)?,
            "train.synchronous" => self.train.synchronous = parse_bool(key, v)?,
            "train.metrics_window" => self.train.metrics_window = parse(key, v)?,
            "eval.trials" => self.eval.trials = parse(key, v)?,
            "eval.alpha" => self.eval.alpha = parse(key, v)?,
            "eval.jitter" => self.eval.jitter = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Every key with its effective value; parses back to an equal config.
    pub fn to_flat(&self) -> String {
        let e = &self.env;
        let mut kv: Vec<(String, String)> = vec![
            ("sim.footprint_radius".into(), e.robot.footprint_radius.to_string()),
            ("sim.max_linear_accel".into(), e.robot.max_linear_accel.to_string()),
            ("sim.max_angular_accel".into(), e.robot.max_angular_accel.to_string()),
            ("sim.max_linear".into(), e.robot.max_linear.to_string()),
            ("sim.max_angular".into(), e.robot.max_angular.to_string()),
            ("sim.resolution".into(), e.resolution.to_string()),
            ("sim.physics_dt".into(), e.physics_dt.to_string()),
            ("sim.decision_period".into(), e.decision_period.to_string()),
            ("sim.goal_tolerance".into(), e.goal_tolerance.to_string()),
            ("sim.timeout_steps".into(), e.timeout_steps.to_string()),
            ("sim.terminal_on_collision".into(), e.terminal_on_collision.to_string()),
            ("ca.fill_probability".into(), self.ca.fill_probability.to_string()),
            ("ca.smoothing_iterations".into(), self.ca.smoothing_iterations.to_string()),
            ("ca.birth_threshold".into(), self.ca.birth_threshold.to_string()),
            ("ca.survive_threshold".into(), self.ca.survive_threshold.to_string()),
            ("ca.world_width".into(), self.ca.world_width.to_string()),
            ("ca.world_height".into(), self.ca.world_height.to_string()),
            ("ca.cell_size".into(), self.ca.cell_size.to_string()),
            ("ca.clear_radius".into(), self.ca.clear_radius.to_string()),
            ("ca.max_retries".into(), self.ca.max_retries.to_string()),
            ("ca.suite_size".into(), self.suite_size.to_string()),
            ("dwa.horizon".into(), e.dwa.horizon.to_string()),
            ("dwa.min_vel_x".into(), e.dwa.min_vel_x.to_string()),
            ("dwa.planner_rate".into(), e.dwa.planner_rate.to_string()),
            ("dwa.window".into(), e.dwa.window.to_string()),
            ("dwa.inflation_decay".into(), e.dwa.inflation_decay.to_string()),
            ("dwa.state_lookahead".into(), e.dwa.state_lookahead.to_string()),
            ("dwa.goal_lookahead".into(), e.dwa.goal_lookahead.to_string()),
            ("dwa.recovery_fraction".into(), e.dwa.recovery_fraction.to_string()),
            ("dwa.tie_tolerance".into(), e.dwa.tie_tolerance.to_string()),
        ];
        for (name, (lo, hi)) in PARAM_NAMES.iter().zip(e.dwa.bounds.ranges) {
            kv.push((format!("dwa.bounds.{name}"), format!("{lo}, {hi}")));
        }
        let t = &self.td3;
        kv.extend([
            ("reward.c_f".into(), e.reward.c_f.to_string()),
            ("reward.c_p".into(), e.reward.c_p.to_string()),
            ("reward.c_c".into(), e.reward.c_c.to_string()),
            ("reward.use_y_axis_progress".into(), e.reward.use_y_axis_progress.to_string()),
            ("reward.per_tick_min_scan".into(), e.reward.per_tick_min_scan.to_string()),
            ("td3.gamma".into(), t.gamma.to_string()),
            ("td3.actor_lr".into(), t.actor_lr.to_string()),
            ("td3.critic_lr".into(), t.critic_lr.to_string()),
            ("td3.batch_size".into(), t.batch_size.to_string()),
            ("td3.policy_delay".into(), t.policy_delay.to_string()),
            ("td3.tau".into(), t.tau.to_string()),
            ("td3.target_noise".into(), t.target_noise.to_string()),
            ("td3.noise_clip".into(), t.noise_clip.to_string()),
            ("td3.target_smoothing".into(), t.target_smoothing.to_string()),
            ("td3.warmup".into(), t.warmup.to_string()),
            ("td3.buffer_capacity".into(), t.buffer_capacity.to_string()),
            ("td3.hidden".into(), join(&t.hidden)),
            ("td3.final_layer_scale".into(), t.final_layer_scale.to_string()),
            ("td3.noise_initial".into(), t.noise.initial.to_string()),
            ("td3.noise_decay_per_million".into(), t.noise.decay_per_million.to_string()),
            ("td3.noise_floor".into(), t.noise.floor.to_string()),
            ("train.workers".into(), self.train.workers.to_string()),
            ("train.total_steps".into(), self.train.total_steps.to_string()),
            ("train.utd".into(), self.train.utd.to_string()),
            ("train.sync_interval".into(), self.train.sync_interval.to_string()),
            ("train.checkpoint_interval".into(), self.train.checkpoint_interval.to_string()),
            ("train.synchronous".into(), self.train.synchronous.to_string()),
            ("train.metrics_window".into(), self.train.metrics_window.to_string()),
            ("eval.trials".into(), self.eval.trials.to_string()),
            ("eval.alpha".into(), self.eval.alpha.to_string()),
            ("eval.jitter".into(), self.eval.jitter.to_string()),
        ]);
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
