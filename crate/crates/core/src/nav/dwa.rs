//! Dynamic-window local planner and the rotate-in-place recovery.

use serde::{Deserialize, Serialize};

use crate::sim::{integrate_arc, LaserScan, Pose2D, RobotSpec, Twist};

use super::costmap::LocalCostmap;
use super::global::GlobalPath;
use super::params::{ParamBounds, PlannerParams};

/// Fixed settings of the navigation stack (the tunable ones live in
/// [`PlannerParams`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwaConfig {
    pub bounds: ParamBounds,
    /// Rollout horizon, seconds. Also the span of the dynamic window.
    pub horizon: f64,
    /// Smallest sampled linear velocity; in-place turns are left to recovery.
    pub min_vel_x: f64,
    /// Local planner rate, Hz.
    pub planner_rate: f64,
    /// Side of the square local costmap, meters.
    pub window: f64,
    /// Exponential inflation decay rate, 1/m.
    pub inflation_decay: f64,
    /// Lookahead of the local goal reported in the RL state.
    pub state_lookahead: f64,
    /// Lookahead of the point the goal-distance term is measured to.
    pub goal_lookahead: f64,
    /// Recovery rotation speed as a fraction of the allowed angular speed.
    pub recovery_fraction: f64,
    /// Relative tolerance under which two candidate costs count as tied.
    pub tie_tolerance: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            bounds: ParamBounds::default(),
            horizon: 1.0,
            min_vel_x: 0.05,
            planner_rate: 5.0,
            window: 4.0,
            inflation_decay: 10.0,
            state_lookahead: 1.0,
            goal_lookahead: 2.0,
            recovery_fraction: 0.6,
            tie_tolerance: 1e-9,
        }
    }
}

/// Result of one local planning cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwaDecision {
    pub twist: Twist,
    pub feasible: bool,
    pub candidate_count: usize,
    pub best_cost: f64,
    pub linear_index: usize,
    pub angular_index: usize,
}

/// Sampled velocities for one cycle, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub linear: Vec<f64>,
    pub angular: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.linear.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidates in (linear index, angular index) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Twist)> + '_ {
        self.linear.iter().enumerate().flat_map(move |(li, &v)| {
            self.angular
                .iter()
                .enumerate()
                .map(move |(ai, &w)| (li, ai, Twist::new(v, w)))
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize, single: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![single],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Linear and angular limits reachable within the horizon, capped by the
/// parameter and actuator limits. Linear velocity never drops below
/// `config.min_vel_x`.
pub fn dynamic_window(current: Twist, params: &PlannerParams, spec: &RobotSpec, config: &DwaConfig) -> ((f64, f64), (f64, f64)) {
    let horizon = config.horizon;
    let v_cap = params.max_vel_x.min(spec.max_linear);
    let w_cap = params.max_vel_theta.min(spec.max_angular);
    let v_hi = (current.linear + spec.max_linear_accel * horizon).min(v_cap);
    let v_lo = (current.linear - spec.max_linear_accel * horizon).max(config.min_vel_x).min(v_hi);
    let w_hi = (current.angular + spec.max_angular_accel * horizon).min(w_cap);
    let w_lo = (current.angular - spec.max_angular_accel * horizon).max(-w_cap);
    let (w_lo, w_hi) = if w_lo > w_hi { (w_hi, w_hi) } else { (w_lo, w_hi) };
    ((v_lo, v_hi.max(v_lo)), (w_lo, w_hi))
}

/// Uniform samples over the dynamic window. With one sample the linear
/// velocity is the window maximum and the angular velocity the one closest
/// to zero.
pub fn candidate_set(current: Twist, params: &PlannerParams, spec: &RobotSpec, config: &DwaConfig) -> CandidateSet {
    let ((v_lo, v_hi), (w_lo, w_hi)) = dynamic_window(current, params, spec, config);
    CandidateSet {
        linear: linspace(v_lo, v_hi, params.vx_samples as usize, v_hi),
        angular: linspace(w_lo, w_hi, params.vtheta_samples as usize, 0.0f64.clamp(w_lo, w_hi)),
    }
}

/// Outcome of rolling one candidate forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rollout {
    pub endpoint: Pose2D,
    pub max_cost: f64,
}

/// Roll a constant twist forward for `horizon` seconds at `dt`; `None` if
/// any visited pose lies on a lethal cell.
pub fn rollout(costmap: &LocalCostmap, pose: Pose2D, twist: Twist, horizon: f64, dt: f64) -> Option<Rollout> {
    let steps = ((horizon / dt).round() as usize).max(1);
    let mut p = pose;
    let mut max_cost = 0.0f64;
    for _ in 0..steps {
        p = integrate_arc(p, twist, dt);
        let c = costmap.cost_at(p.x, p.y);
        if c.is_infinite() {
            return None;
        }
        max_cost = max_cost.max(c);
    }
    Some(Rollout { endpoint: p, max_cost })
}

/// Weighted trajectory cost.
#[inline]
pub fn trajectory_cost(params: &PlannerParams, path_distance: f64, goal_distance: f64, obstacle_cost: f64) -> f64 {
    params.pdist_scale * path_distance + params.gdist_scale * goal_distance + params.occdist_scale * obstacle_cost
}

/// Pick the lowest-index candidate whose cost is within the relative tie
/// tolerance of the minimum.
pub fn select_min(costs: &[(usize, usize, f64)], tie_tolerance: f64) -> Option<(usize, usize, f64)> {
    let min = costs.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let limit = min + tie_tolerance * min.abs();
    costs.iter().copied().find(|c| c.2 <= limit)
}

/// Score every candidate and return the cheapest collision-free one.
#[allow(clippy::too_many_arguments)]
pub fn dwa_plan(
    costmap: &LocalCostmap,
    pose: Pose2D,
    current: Twist,
    path: &GlobalPath,
    goal_point: [f64; 2],
    params: &PlannerParams,
    spec: &RobotSpec,
    config: &DwaConfig,
    dt: f64,
) -> DwaDecision {
    let set = candidate_set(current, params, spec, config);
    let scored: Vec<(usize, usize, f64)> = set
        .iter()
        .filter_map(|(li, ai, twist)| {
            let r = rollout(costmap, pose, twist, config.horizon, dt)?;
            let e = r.endpoint.position();
            let pd = path.distance_to(e);
            let gd = (goal_point[0] - e[0]).hypot(goal_point[1] - e[1]);
            Some((li, ai, trajectory_cost(params, pd, gd, r.max_cost)))
        })
        .collect();
    match select_min(&scored, config.tie_tolerance) {
        Some((li, ai, cost)) => DwaDecision {
            twist: Twist::new(set.linear[li], set.angular[ai]),
            feasible: true,
            candidate_count: set.len(),
            best_cost: cost,
            linear_index: li,
            angular_index: ai,
        },
        None => DwaDecision {
            twist: Twist::ZERO,
            feasible: false,
            candidate_count: set.len(),
            best_cost: f64::INFINITY,
            linear_index: 0,
            angular_index: 0,
        },
    }
}

/// Rotate in place toward the side with the larger mean range; ties turn
/// toward positive angles.
pub fn recovery_behavior(scan: &LaserScan, params: &PlannerParams, spec: &RobotSpec, fraction: f64) -> Twist {
    let speed = fraction * params.max_vel_theta.min(spec.max_angular);
    let (right, left) = scan.half_means();
    Twist::new(0.0, if right > left { -speed } else { speed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearance::ClearanceMap;
    use crate::sim::{OccupancyGrid, SCAN_BEAMS};

    fn open_world() -> (OccupancyGrid, ClearanceMap) {
        let g = OccupancyGrid::new(200, 200, 0.05).unwrap();
        let c = ClearanceMap::compute(&g);
        (g, c)
    }

    fn straight_path(from: [f64; 2], len: f64) -> GlobalPath {
        let n = (len / 0.05) as usize;
        GlobalPath::from_waypoints((0..=n).map(|k| [from[0] + k as f64 * 0.05, from[1]]).collect())
    }

    #[test]
    fn open_space_goes_full_speed() {
        let (g, c) = open_world();
        let spec = RobotSpec::default();
        let cfg = DwaConfig::default();
        let mut params = cfg.bounds.defaults();
        params.vx_samples = 12;
        params.vtheta_samples = 21;
        let pose = Pose2D::new(2.0, 5.0, 0.0);
        let cm = LocalCostmap::build(&g, &c, pose, &params, &spec, cfg.window, cfg.inflation_decay);
        let path = straight_path([2.0, 5.0], 6.0);
        let d = dwa_plan(&cm, pose, Twist::ZERO, &path, [4.0, 5.0], &params, &spec, &cfg, 0.05);
        assert!(d.feasible);
        assert_eq!(d.twist.linear, params.max_vel_x);
        assert!(d.twist.angular.abs() < 1e-12);
    }

    #[test]
    fn boxed_robot_is_infeasible() {
        let mut g = OccupancyGrid::new(200, 200, 0.05).unwrap();
        // Ring of obstacles just outside the footprint around (5, 5).
        for j in 0..200 {
            for i in 0..200 {
                let p = g.cell_center(i, j);
                let d = (p[0] - 5.0).hypot(p[1] - 5.0);
                if (0.31..0.4).contains(&d) {
                    g.set(i, j, true);
                }
            }
        }
        let c = ClearanceMap::compute(&g);
        let spec = RobotSpec::default();
        let cfg = DwaConfig::default();
        let params = cfg.bounds.defaults();
        let pose = Pose2D::new(5.0, 5.0, 0.0);
        let cm = LocalCostmap::build(&g, &c, pose, &params, &spec, cfg.window, cfg.inflation_decay);
        let path = straight_path([5.0, 5.0], 3.0);
        let d = dwa_plan(&cm, pose, Twist::ZERO, &path, [7.0, 5.0], &params, &spec, &cfg, 0.05);
        assert!(!d.feasible);
        assert_eq!(d.candidate_count, 8 * 24);
    }

    #[test]
    fn single_sample_returns_only_candidate() {
        let (g, c) = open_world();
        let spec = RobotSpec::default();
        let cfg = DwaConfig::default();
        let mut params = cfg.bounds.defaults();
        params.vx_samples = 1;
        params.vtheta_samples = 1;
        let pose = Pose2D::new(5.0, 5.0, 1.0);
        let cm = LocalCostmap::build(&g, &c, pose, &params, &spec, cfg.window, cfg.inflation_decay);
        let path = straight_path([5.0, 5.0], 2.0);
        for scale in [0.1, 1.0, 100.0] {
            params.pdist_scale = scale;
            params.gdist_scale = 1.0 / scale;
            let d = dwa_plan(&cm, pose, Twist::ZERO, &path, [7.0, 5.0], &params, &spec, &cfg, 0.05);
            assert_eq!(d.candidate_count, 1);
            assert_eq!(d.twist, Twist::new(params.max_vel_x, 0.0));
        }
    }

    #[test]
    fn window_respects_limits() {
        let spec = RobotSpec::default();
        let mut params = DwaConfig::default().bounds.defaults();
        params.max_vel_x = 0.1;
        let set = candidate_set(Twist::new(0.05, 0.0), &params, &spec, &DwaConfig::default());
        assert!(set.linear.iter().all(|&v| (0.05..=0.1).contains(&v)));
        assert!(set.angular.iter().all(|&w| w.abs() <= params.max_vel_theta));
        assert_eq!(set.len(), (params.vx_samples * params.vtheta_samples) as usize);
    }

    #[test]
    fn recovery_direction() {
        let spec = RobotSpec::default();
        let params = DwaConfig::default().bounds.defaults();
        let sym = LaserScan { ranges: vec![1.0; SCAN_BEAMS] };
        let t = recovery_behavior(&sym, &params, &spec, 0.6);
        assert!(t.angular > 0.0 && t.linear == 0.0);
        assert!((t.angular - 0.6 * params.max_vel_theta).abs() < 1e-12);
        let mut ranges = vec![0.5; SCAN_BEAMS];
        ranges[SCAN_BEAMS / 2..].iter_mut().for_each(|r| *r = 2.0);
        let t = recovery_behavior(&LaserScan { ranges: ranges.clone() }, &params, &spec, 0.6);
        assert!(t.angular > 0.0);
        ranges.reverse();
        let t = recovery_behavior(&LaserScan { ranges }, &params, &spec, 0.6);
        assert!(t.angular < 0.0);
    }
}
