//! Learning runtime parameter policies for a classical navigation stack.
//!
//! A 2D differential-drive simulator ([`sim`]) and a procedurally generated
//! environment suite ([`envgen`]) host a Dijkstra + DWA planner ([`nav`])
//! whose eight parameters become the action of an MDP ([`meta_env`]). A TD3
//! learner ([`td3`]) is trained by an actor/learner orchestrator
//! ([`trainer`]) and compared against fixed parameters by [`eval`].

mod binio;
pub mod clearance;
pub mod config;
pub mod envgen;
pub mod error;
pub mod eval;
pub mod meta_env;
pub mod nav;
pub mod sim;
pub mod td3;
pub mod trainer;

pub use clearance::ClearanceMap;
pub use config::Config;
pub use envgen::{build_env, build_suite, generate_map, CaConfig, EnvSpec, Split, Suite};
pub use error::{Error, Result};
pub use eval::{build_report, run_trials, stratify, welch_t_test, ComparisonReport, EvalConfig, Method, TrialResult};
pub use meta_env::{compute_reward, run_deployment, MetaEnv, MetaEnvConfig, MetaState, RewardConfig, Transition};
pub use nav::{dwa_plan, local_goal, plan_global, DwaConfig, DwaDecision, GlobalPath, LocalCostmap, NavStack, ParamBounds, PlannerParams};
pub use sim::{check_collision, raycast_scan, step_kinematics, LaserScan, OccupancyGrid, Pose2D, RobotSpec, Twist};
pub use td3::{exploration_noise_sigma, Mlp, ReplayBuffer, Td3Agent, Td3Config};
pub use trainer::{train, TrainConfig, TrainOutcome, TrainSetup};
