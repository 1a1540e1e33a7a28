//! Shared fixtures for the criterion benches.

use navtune_core::envgen::{build_env, CaConfig, EnvSpec};
use navtune_core::sim::RobotSpec;

/// A deterministic generated environment at the default resolution.
pub fn fixture_env(seed: u64) -> EnvSpec {
    build_env(0, seed, &CaConfig::default(), 0.05, &RobotSpec::default()).expect("fixture environment")
}
