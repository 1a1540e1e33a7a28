//! The parameter-tuning MDP: actions are planner parameters held for one
//! decision period while the navigation stack drives the robot.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envgen::EnvSpec;
use crate::error::{Error, Result};
use crate::nav::{DwaConfig, NavStack, NavWorld, ParamBounds, PlannerParams, PARAM_COUNT, PARAM_NAMES};
use crate::sim::{check_collision, integrate_arc, raycast_scan, LaserScan, Pose2D, RobotSpec, Twist, SCAN_BEAMS, SCAN_MAX_RANGE};

/// Length of the flattened state: scan, local-goal bearing, previous parameters.
pub const STATE_DIM: usize = SCAN_BEAMS + 1 + PARAM_COUNT;
/// Length of the action vector.
pub const ACTION_DIM: usize = PARAM_COUNT;

/// Flattened RL state `(scan / max_range, phi, normalized previous params)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaState(Vec<f64>);

impl MetaState {
    pub fn new(scan: &LaserScan, phi: f64, prev: &PlannerParams, bounds: &ParamBounds) -> Self {
        let mut v = Vec::with_capacity(STATE_DIM);
        v.extend(scan.ranges.iter().map(|r| r / SCAN_MAX_RANGE));
        v.push(phi);
        v.extend(bounds.normalize(prev));
        Self(v)
    }

    pub fn from_vec(v: Vec<f64>) -> Result<Self> {
        if v.len() != STATE_DIM {
            return Err(Error::DimensionMismatch {
                expected: STATE_DIM,
                actual: v.len(),
            });
        }
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scan(&self) -> &[f64] {
        &self.0[..SCAN_BEAMS]
    }

    pub fn phi(&self) -> f64 {
        self.0[SCAN_BEAMS]
    }

    pub fn prev_params(&self) -> &[f64] {
        &self.0[SCAN_BEAMS + 1..]
    }
}

/// One replay record. `done` marks goal-reaching terminals only; a timeout
/// ends the episode without cutting off bootstrapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: MetaState,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: MetaState,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub c_f: f64,
    pub c_p: f64,
    pub c_c: f64,
    /// Progress is the change in `y` instead of the projection onto the goal direction.
    pub use_y_axis_progress: bool,
    /// Take the collision term from the smallest beam seen on any tick of the period.
    pub per_tick_min_scan: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            c_f: 1.0,
            c_p: 1.0,
            c_c: 0.05,
            use_y_axis_progress: true,
            per_tick_min_scan: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_f", self.c_f), ("c_p", self.c_p), ("c_c", self.c_c)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("reward.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Progress term: displacement projected on the direction to the goal, or
/// the `y` displacement in y-axis mode.
pub fn progress(p_t: [f64; 2], p_next: [f64; 2], goal: [f64; 2], y_axis: bool) -> Result<f64> {
    let (dx, dy) = (p_next[0] - p_t[0], p_next[1] - p_t[1]);
    if y_axis {
        return Ok(dy);
    }
    let (gx, gy) = (goal[0] - p_t[0], goal[1] - p_t[1]);
    let norm = gx.hypot(gy);
    if norm == 0.0 {
        return Err(Error::DegenerateGoalDirection);
    }
    Ok((dx * gx + dy * gy) / norm)
}

/// `c_f * R_f + c_p * R_p + c_c * R_c` with `R_f = 1[terminal] - 1` and `R_c = -1/d`.
pub fn compute_reward(p_t: [f64; 2], p_next: [f64; 2], goal: [f64; 2], min_range: f64, terminal: bool, cfg: &RewardConfig) -> Result<f64> {
    let r_f = if terminal { 0.0 } else { -1.0 };
    let r_p = progress(p_t, p_next, goal, cfg.use_y_axis_progress)?;
    if !(min_range > 0.0) {
        return Err(Error::NonFinite("min beam range"));
    }
    let r_c = -1.0 / min_range;
    Ok(cfg.c_f * r_f + cfg.c_p * r_p + cfg.c_c * r_c)
}

/// Everything that shapes an episode apart from the world itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaEnvConfig {
    pub robot: RobotSpec,
    pub dwa: DwaConfig,
    pub reward: RewardConfig,
    pub resolution: f64,
    /// Physics tick, seconds.
    pub physics_dt: f64,
    /// Seconds each parameter set is held.
    pub decision_period: f64,
    pub goal_tolerance: f64,
    /// Episode length cap in decisions.
    pub timeout_steps: u32,
    pub terminal_on_collision: bool,
}

impl Default for MetaEnvConfig {
    fn default() -> Self {
        Self {
            robot: RobotSpec::default(),
            dwa: DwaConfig::default(),
            reward: RewardConfig::default(),
            resolution: 0.05,
            physics_dt: 0.05,
            decision_period: 2.0,
            goal_tolerance: 0.3,
            timeout_steps: 50,
            terminal_on_collision: false,
        }
    }
}

impl MetaEnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.dwa.bounds.validate()?;
        self.reward.validate()?;
        let positive = [
            ("sim.resolution", self.resolution),
            ("sim.physics_dt", self.physics_dt),
            ("sim.decision_period", self.decision_period),
            ("sim.goal_tolerance", self.goal_tolerance),
            ("dwa.horizon", self.dwa.horizon),
            ("dwa.planner_rate", self.dwa.planner_rate),
            ("dwa.window", self.dwa.window),
            ("dwa.state_lookahead", self.dwa.state_lookahead),
            ("dwa.goal_lookahead", self.dwa.goal_lookahead),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.timeout_steps == 0 {
            return Err(Error::Config("sim.timeout_steps must be at least 1".into()));
        }
        let (cycles, ticks) = (self.planner_cycles(), self.ticks_per_cycle());
        if cycles == 0 || ticks == 0 {
            return Err(Error::Config("decision period, planner rate and physics tick give no ticks".into()));
        }
        Ok(())
    }

    /// Planner cycles per decision period.
    pub fn planner_cycles(&self) -> usize {
        (self.decision_period * self.dwa.planner_rate).round() as usize
    }

    /// Physics ticks per planner cycle.
    pub fn ticks_per_cycle(&self) -> usize {
        (1.0 / (self.dwa.planner_rate * self.physics_dt)).round() as usize
    }
}

/// Side information from one decision step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub reached_goal: bool,
    pub timeout: bool,
    pub collisions: u32,
    pub recoveries: u32,
    pub sim_time: f64,
    pub pose: Pose2D,
    pub params: PlannerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: MetaState,
    pub reward: f64,
    /// Episode over: goal reached, timeout, or a terminal collision.
    pub done: bool,
    /// Whether the next state is terminal for bootstrapping purposes.
    pub terminal: bool,
    pub info: StepInfo,
}

/// One episode context over a fixed world.
#[derive(Debug, Clone)]
pub struct MetaEnv {
    cfg: MetaEnvConfig,
    start: Pose2D,
    goal: [f64; 2],
    stack: NavStack,
    pose: Pose2D,
    twist: Twist,
    prev: PlannerParams,
    steps: u32,
    sim_time: f64,
    state: Option<MetaState>,
    done: bool,
}

impl MetaEnv {
    pub fn new(env: &EnvSpec, cfg: MetaEnvConfig) -> Self {
        let world = Arc::new(NavWorld::new(env.grid.clone(), &cfg.robot));
        Self::with_world(world, env.start, env.goal, cfg)
    }

    pub fn with_world(world: Arc<NavWorld>, start: Pose2D, goal: [f64; 2], cfg: MetaEnvConfig) -> Self {
        let stack = NavStack::new(world, goal, cfg.robot, cfg.dwa, cfg.physics_dt);
        Self {
            cfg,
            start,
            goal,
            stack,
            pose: start,
            twist: Twist::ZERO,
            prev: cfg.dwa.bounds.defaults(),
            steps: 0,
            sim_time: 0.0,
            state: None,
            done: false,
        }
    }

    pub fn config(&self) -> &MetaEnvConfig {
        &self.cfg
    }

    pub fn bounds(&self) -> &ParamBounds {
        &self.cfg.dwa.bounds
    }

    pub fn pose(&self) -> Pose2D {
        self.pose
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn stack(&self) -> &NavStack {
        &self.stack
    }

    /// Reset to the nominal start pose.
    pub fn reset(&mut self) -> Result<MetaState> {
        self.reset_from(self.start)
    }

    /// Reset to an arbitrary collision-free start pose.
    pub fn reset_from(&mut self, start: Pose2D) -> Result<MetaState> {
        self.pose = start;
        self.twist = Twist::ZERO;
        self.prev = self.cfg.dwa.bounds.defaults();
        self.steps = 0;
        self.sim_time = 0.0;
        self.done = false;
        self.state = None;
        self.stack = NavStack::new(self.stack_world(), self.goal, self.cfg.robot, self.cfg.dwa, self.cfg.physics_dt);
        self.stack.replan(start)?;
        let state = self.observe()?;
        self.state = Some(state.clone());
        Ok(state)
    }

    fn stack_world(&self) -> Arc<NavWorld> {
        self.stack.world_arc()
    }

    fn observe(&self) -> Result<MetaState> {
        let scan = raycast_scan(&self.stack.world().grid, self.pose)?;
        let phi = self.stack.local_goal_angle(self.pose);
        Ok(MetaState::new(&scan, phi, &self.prev, &self.cfg.dwa.bounds))
    }

    /// Apply a normalized action for one decision period.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != ACTION_DIM {
            return Err(Error::DimensionMismatch {
                expected: ACTION_DIM,
                actual: action.len(),
            });
        }
        let params = self.cfg.dwa.bounds.denormalize(action);
        self.step_params(params)
    }

    /// Apply explicit parameters for one decision period.
    pub fn step_params(&mut self, params: PlannerParams) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if self.state.is_none() {
            return Err(Error::NotReset);
        }
        let grid_spec = self.cfg.robot;
        let p_t = self.pose.position();
        let mut collisions = 0u32;
        let mut recoveries = 0u32;
        let mut reached = self.reached();
        let mut min_tick_range = f64::INFINITY;
        'period: for _ in 0..self.cfg.planner_cycles() {
            if reached {
                break;
            }
            let out = self.stack.step(self.pose, self.twist, &params)?;
            if out.recovering {
                recoveries += 1;
            }
            let cmd = Twist::new(
                out.twist.linear.clamp(-grid_spec.max_linear, grid_spec.max_linear),
                out.twist.angular.clamp(-grid_spec.max_angular, grid_spec.max_angular),
            );
            for _ in 0..self.cfg.ticks_per_cycle() {
                let next = integrate_arc(self.pose, cmd, self.cfg.physics_dt);
                self.sim_time += self.cfg.physics_dt;
                if check_collision(&self.stack.world().grid, next, &grid_spec) {
                    collisions += 1;
                    self.twist = Twist::ZERO;
                    if self.cfg.terminal_on_collision {
                        break 'period;
                    }
                    break;
                }
                self.pose = next;
                self.twist = cmd;
                if self.cfg.reward.per_tick_min_scan {
                    min_tick_range = min_tick_range.min(raycast_scan(&self.stack.world().grid, self.pose)?.min_range());
                }
                if self.reached() {
                    reached = true;
                    break 'period;
                }
            }
        }
        self.steps += 1;
        self.prev = params;
        let timeout = !reached && self.steps >= self.cfg.timeout_steps;
        let crashed = self.cfg.terminal_on_collision && collisions > 0;
        if !reached {
            // Keep the old path when the robot has wandered somewhere unplannable.
            let _ = self.stack.replan(self.pose);
        }
        let scan = raycast_scan(&self.stack.world().grid, self.pose)?;
        let d = if self.cfg.reward.per_tick_min_scan {
            min_tick_range.min(scan.min_range())
        } else {
            scan.min_range()
        };
        let reward = compute_reward(p_t, self.pose.position(), self.goal, d, reached, &self.cfg.reward)?;
        let phi = self.stack.local_goal_angle(self.pose);
        let state = MetaState::new(&scan, phi, &self.prev, &self.cfg.dwa.bounds);
        self.done = reached || timeout || crashed;
        self.state = Some(state.clone());
        Ok(StepResult {
            state,
            reward,
            done: self.done,
            terminal: reached || crashed,
            info: StepInfo {
                reached_goal: reached,
                timeout,
                collisions,
                recoveries,
                sim_time: self.sim_time,
                pose: self.pose,
                params,
            },
        })
    }

    fn reached(&self) -> bool {
        self.pose.distance_to(self.goal) <= self.cfg.goal_tolerance
    }
}

/// Source of planner parameters for each decision.
pub trait ParamPolicy {
    fn decide(&mut self, state: &MetaState, bounds: &ParamBounds) -> Result<PlannerParams>;
}

/// The fixed-parameter baseline.
#[derive(Debug, Clone, Copy)]
pub struct FixedPolicy(pub PlannerParams);

impl ParamPolicy for FixedPolicy {
    fn decide(&mut self, _: &MetaState, _: &ParamBounds) -> Result<PlannerParams> {
        Ok(self.0)
    }
}

/// One row of a trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub decision_index: u32,
    pub sim_time: f64,
    pub pose: Pose2D,
    pub params: PlannerParams,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub records: Vec<DecisionRecord>,
    pub reached_goal: bool,
    /// Simulated seconds until the goal, `None` on timeout.
    pub traversal_time: Option<f64>,
}

/// Navigate from `start` with parameters chosen by `policy` every decision
/// period until the goal is reached or the episode times out.
pub fn run_deployment(env: &mut MetaEnv, start: Pose2D, policy: &mut dyn ParamPolicy) -> Result<Deployment> {
    let mut state = env.reset_from(start)?;
    let mut records = Vec::new();
    loop {
        let params = policy.decide(&state, env.bounds())?;
        let step = env.step_params(params)?;
        records.push(DecisionRecord {
            decision_index: env.steps() - 1,
            sim_time: step.info.sim_time,
            pose: step.info.pose,
            params,
            reward: step.reward,
            done: step.done,
        });
        state = step.state;
        if step.done {
            return Ok(Deployment {
                records,
                reached_goal: step.info.reached_goal,
                traversal_time: step.info.reached_goal.then_some(step.info.sim_time),
            });
        }
    }
}

const TRAJECTORY_HEADER_PREFIX: &str = "decision_index,sim_time_s,x,y,heading";

fn trajectory_header() -> String {
    let mut h = TRAJECTORY_HEADER_PREFIX.to_string();
    for n in PARAM_NAMES {
        h.push(',');
        h.push_str(n);
    }
    h.push_str(",reward,done");
    h
}

/// Trajectory log as CSV, one row per decision.
pub fn trajectory_csv(records: &[DecisionRecord]) -> String {
    let mut out = trajectory_header();
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{},{},{},{}", r.decision_index, r.sim_time, r.pose.x, r.pose.y, r.pose.heading);
        for v in r.params.to_array() {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{}", r.reward, u8::from(r.done));
    }
    out
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<DecisionRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(trajectory_header().as_str()) {
        return Err(Error::parse("trajectory", "unexpected header"));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 + PARAM_COUNT {
            return Err(Error::parse("trajectory", format!("row {} has {} fields", n + 2, f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse("trajectory", format!("bad number {s:?} on row {}", n + 2)));
        let mut params = [0.0; PARAM_COUNT];
        for (k, slot) in params.iter_mut().enumerate() {
            *slot = num(f[5 + k])?;
        }
        out.push(DecisionRecord {
            decision_index: f[0].parse().map_err(|_| Error::parse("trajectory", format!("bad index on row {}", n + 2)))?,
            sim_time: num(f[1])?,
            pose: Pose2D {
                x: num(f[2])?,
                y: num(f[3])?,
                heading: num(f[4])?,
            },
            params: PlannerParams::from_array(params),
            reward: num(f[5 + PARAM_COUNT])?,
            done: f[6 + PARAM_COUNT] == "1",
        });
    }
    Ok(out)
}

pub fn write_trajectory(path: &Path, records: &[DecisionRecord]) -> Result<()> {
    std::fs::write(path, trajectory_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<DecisionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_csv(&text)
}
