//! Classical navigation stack: Dijkstra global planning, local costmap
//! inflation and a DWA local planner driven by eight tunable parameters.

pub mod costmap;
pub mod dwa;
pub mod global;
pub mod params;
pub mod stack;

pub use costmap::{inflation_cost, LocalCostmap, LETHAL};
pub use dwa::{candidate_set, dwa_plan, dynamic_window, recovery_behavior, rollout, select_min, trajectory_cost, CandidateSet, DwaConfig, DwaDecision, Rollout};
pub use global::{local_goal, plan_global, plan_on_mask, relative_bearing, traversable_mask, GlobalPath};
pub use params::{ParamBounds, PlannerParams, PARAM_COUNT, PARAM_NAMES};
pub use stack::{NavStack, NavWorld, PlannerOutput};
