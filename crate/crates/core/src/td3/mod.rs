//! TD3 actor-critic learner written against flat parameter vectors.

pub mod agent;
pub mod mlp;
pub mod replay;

pub use agent::{concat_rows, exploration_noise_sigma, td3_target, NoiseSchedule, Td3Agent, Td3Config, UpdateStats};
pub use mlp::{Adam, ForwardCache, Mlp, OutputActivation};
pub use replay::{Batch, ReplayBuffer};
