use std::sync::Arc;

use crate::clearance::ClearanceMap;
use crate::error::{Error, Result};
use crate::sim::{raycast_scan, OccupancyGrid, Pose2D, RobotSpec, Twist};

use super::costmap::LocalCostmap;
use super::dwa::{dwa_plan, recovery_behavior, DwaConfig, DwaDecision};
use super::global::{local_goal, plan_on_mask, traversable_mask, GlobalPath};
use super::params::PlannerParams;

/// Static per-world data shared by every episode in that world.
#[derive(Debug)]
pub struct NavWorld {
    pub grid: OccupancyGrid,
    pub clearance: ClearanceMap,
    pub traversable: Vec<bool>,
}

impl NavWorld {
    pub fn new(grid: OccupancyGrid, spec: &RobotSpec) -> Self {
        let clearance = ClearanceMap::compute(&grid);
        let traversable = traversable_mask(&clearance, spec);
        Self {
            grid,
            clearance,
            traversable,
        }
    }
}

/// Output of one planner cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOutput {
    pub twist: Twist,
    pub decision: DwaDecision,
    pub recovering: bool,
}

/// Per-episode planner state: the current global path and recovery counter.
#[derive(Debug, Clone)]
pub struct NavStack {
    world: Arc<NavWorld>,
    goal: [f64; 2],
    spec: RobotSpec,
    config: DwaConfig,
    dt: f64,
    path: Option<GlobalPath>,
    recovery_count: u32,
}

impl NavStack {
    pub fn new(world: Arc<NavWorld>, goal: [f64; 2], spec: RobotSpec, config: DwaConfig, dt: f64) -> Self {
        Self {
            world,
            goal,
            spec,
            config,
            dt,
            path: None,
            recovery_count: 0,
        }
    }

    pub fn world(&self) -> &NavWorld {
        &self.world
    }

    pub fn world_arc(&self) -> Arc<NavWorld> {
        Arc::clone(&self.world)
    }

    pub fn path(&self) -> Option<&GlobalPath> {
        self.path.as_ref()
    }

    pub fn recovery_count(&self) -> u32 {
        self.recovery_count
    }

    pub fn config(&self) -> &DwaConfig {
        &self.config
    }

    /// Plan a fresh global path from `pose`. On failure the previous path is kept.
    pub fn replan(&mut self, pose: Pose2D) -> Result<&GlobalPath> {
        let path = plan_on_mask(&self.world.grid, &self.world.traversable, pose.position(), self.goal)?;
        Ok(self.path.insert(path))
    }

    /// Bearing of the state local goal in the robot frame.
    pub fn local_goal_angle(&self, pose: Pose2D) -> f64 {
        self.path
            .as_ref()
            .map(|p| local_goal(p, pose, self.config.state_lookahead).1)
            .unwrap_or(0.0)
    }

    /// One cycle of `u = f(o, goal | params)`: DWA, or recovery when no
    /// candidate is collision-free.
    pub fn step(&mut self, pose: Pose2D, current: Twist, params: &PlannerParams) -> Result<PlannerOutput> {
        let path = self.path.as_ref().ok_or(Error::NoPath)?;
        let costmap = LocalCostmap::build(
            &self.world.grid,
            &self.world.clearance,
            pose,
            params,
            &self.spec,
            self.config.window,
            self.config.inflation_decay,
        );
        let (goal_point, _) = local_goal(path, pose, self.config.goal_lookahead);
        let decision = dwa_plan(&costmap, pose, current, path, goal_point, params, &self.spec, &self.config, self.dt);
        if decision.feasible {
            self.recovery_count = 0;
            return Ok(PlannerOutput {
                twist: decision.twist,
                decision,
                recovering: false,
            });
        }
        self.recovery_count += 1;
        let scan = raycast_scan(&self.world.grid, pose)?;
        let twist = recovery_behavior(&scan, params, &self.spec, self.config.recovery_fraction);
        Ok(PlannerOutput {
            twist,
            decision,
            recovering: true,
        })
    }
}
