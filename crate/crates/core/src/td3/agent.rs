use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::binio::{read_file, read_rng, write_rng, Reader, Writer};
use crate::error::{Error, Result};
use crate::meta_env::{ACTION_DIM, STATE_DIM};

use super::mlp::{Adam, Mlp, OutputActivation};
use super::replay::{Batch, ReplayBuffer};

const MAGIC: &[u8; 8] = b"NTTD3CK\0";
const FORMAT_VERSION: u32 = 1;

/// Linearly decaying Gaussian exploration noise with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub initial: f64,
    pub decay_per_million: f64,
    pub floor: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            initial: 0.5,
            decay_per_million: 0.125,
            floor: 0.02,
        }
    }
}

impl NoiseSchedule {
    pub fn sigma(&self, env_steps: u64) -> f64 {
        (self.initial - self.decay_per_million * env_steps as f64 / 1e6).max(self.floor)
    }
}

/// Exploration standard deviation under the default schedule.
pub fn exploration_noise_sigma(env_steps: u64) -> f64 {
    NoiseSchedule::default().sigma(env_steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Config {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub policy_delay: u64,
    pub tau: f64,
    /// Target policy smoothing noise, in normalized action units.
    pub target_noise: f64,
    pub noise_clip: f64,
    pub target_smoothing: bool,
    /// Decision steps of uniform random actions before learning starts.
    pub warmup: u64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub final_layer_scale: f64,
    pub noise: NoiseSchedule,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            batch_size: 256,
            policy_delay: 2,
            tau: 0.005,
            target_noise: 0.2,
            noise_clip: 0.5,
            target_smoothing: true,
            warmup: 2000,
            buffer_capacity: 500_000,
            hidden: vec![512, 512, 512],
            final_layer_scale: 0.01,
            noise: NoiseSchedule::default(),
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("td3.gamma must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("td3.tau must lie in (0, 1]");
        }
        if self.policy_delay == 0 {
            return bad("td3.policy_delay must be at least 1");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("td3.batch_size must be positive and fit in the buffer");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("td3.hidden needs at least one non-empty layer");
        }
        if !(self.target_noise >= 0.0 && self.noise_clip >= 0.0) {
            return bad("target smoothing noise and clip must be non-negative");
        }
        let n = self.noise;
        if !(n.initial >= 0.0 && n.decay_per_million >= 0.0 && n.floor >= 0.0) {
            return bad("exploration noise schedule must be non-negative");
        }
        Ok(())
    }
}

/// Clipped double-Q regression target.
#[inline]
pub fn td3_target(reward: f64, done: bool, gamma: f64, q1: f64, q2: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q1.min(q2)
    }
}

/// Row-wise `[state | action]`.
pub fn concat_rows(states: &[f64], actions: &[f64], batch: usize) -> Vec<f64> {
    let sd = states.len() / batch;
    let ad = actions.len() / batch;
    let mut out = Vec::with_capacity(batch * (sd + ad));
    for b in 0..batch {
        out.extend_from_slice(&states[b * sd..(b + 1) * sd]);
        out.extend_from_slice(&actions[b * ad..(b + 1) * ad]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub actor_loss: Option<f64>,
}

/// Actor, twin critics, their targets and optimizers.
#[derive(Debug, Clone)]
pub struct Td3Agent {
    cfg: Td3Config,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    rng: ChaCha8Rng,
    critic_updates: u64,
    actor_updates: u64,
}

impl Td3Agent {
    pub fn new(cfg: Td3Config, seed: u64) -> Result<Self> {
        Self::with_dims(STATE_DIM, ACTION_DIM, cfg, seed)
    }

    pub fn with_dims(state_dim: usize, action_dim: usize, cfg: Td3Config, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![state_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(action_dim);
        let actor = Mlp::init(&sizes, OutputActivation::Tanh, cfg.final_layer_scale, &mut init_rng)?;
        sizes[0] = state_dim + action_dim;
        *sizes.last_mut().expect("non-empty") = 1;
        let critic1 = Mlp::init(&sizes, OutputActivation::Linear, 1.0, &mut init_rng)?;
        let critic2 = Mlp::init(&sizes, OutputActivation::Linear, 1.0, &mut init_rng)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(Self {
            actor_opt: Adam::new(actor.param_count(), cfg.actor_lr),
            critic1_opt: Adam::new(critic1.param_count(), cfg.critic_lr),
            critic2_opt: Adam::new(critic2.param_count(), cfg.critic_lr),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            cfg,
            rng,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.cfg
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    /// Deterministic policy output.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(state)
    }

    /// Sample a batch and run one critic update, plus an actor update every
    /// `policy_delay` critic updates.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<UpdateStats> {
        let batch = buffer.sample(&mut self.rng, self.cfg.batch_size)?;
        self.update_with_batch(&batch)
    }

    pub fn update_with_batch(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let (critic1_loss, critic2_loss) = self.critic_update(batch)?;
        let actor_loss = if self.critic_updates % self.cfg.policy_delay == 0 {
            Some(self.actor_update(batch)?)
        } else {
            None
        };
        Ok(UpdateStats {
            critic1_loss,
            critic2_loss,
            actor_loss,
        })
    }

    /// Regression targets for a batch; smoothing noise comes from the agent RNG.
    pub fn targets(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let n = batch.size;
        let next = self.actor_target.forward(&batch.next_states, n)?;
        let mut next_actions = next.output().to_vec();
        if self.cfg.target_smoothing {
            let (sigma, clip) = (self.cfg.target_noise, self.cfg.noise_clip);
            for a in &mut next_actions {
                let z: f64 = self.rng.sample(StandardNormal);
                *a = (*a + (sigma * z).clamp(-clip, clip)).clamp(-1.0, 1.0);
            }
        }
        let input = concat_rows(&batch.next_states, &next_actions, n);
        let q1 = self.critic1_target.forward(&input, n)?;
        let q2 = self.critic2_target.forward(&input, n)?;
        Ok((0..n)
            .map(|i| td3_target(batch.rewards[i], batch.dones[i], self.cfg.gamma, q1.output()[i], q2.output()[i]))
            .collect())
    }

    /// One mean-squared Bellman step for both critics; returns their losses.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let n = batch.size;
        let y = self.targets(batch)?;
        let input = concat_rows(&batch.states, &batch.actions, n);
        let l1 = regress(&mut self.critic1, &mut self.critic1_opt, &input, &y)?;
        let l2 = regress(&mut self.critic2, &mut self.critic2_opt, &input, &y)?;
        self.critic_updates += 1;
        Ok((l1, l2))
    }

    /// Deterministic policy gradient step through the first critic, then a
    /// soft update of every target network. Returns `-mean Q1(s, pi(s))`.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let n = batch.size;
        let action_dim = self.actor.output_dim();
        let pi = self.actor.forward(&batch.states, n)?;
        let input = concat_rows(&batch.states, pi.output(), n);
        let q = self.critic1.forward(&input, n)?;
        let loss = -q.output().iter().sum::<f64>() / n as f64;
        let upstream = vec![-1.0 / n as f64; n];
        let mut scratch = vec![0.0; self.critic1.param_count()];
        let dinput = self.critic1.backward(&q, &upstream, &mut scratch, true)?.expect("input gradient requested");
        let in_dim = self.critic1.input_dim();
        let state_dim = in_dim - action_dim;
        let mut da = Vec::with_capacity(n * action_dim);
        for row in dinput.chunks_exact(in_dim) {
            da.extend_from_slice(&row[state_dim..]);
        }
        let mut grads = vec![0.0; self.actor.param_count()];
        self.actor.backward(&pi, &da, &mut grads, false)?;
        self.actor_opt.step(&mut self.actor, &grads);
        self.actor_updates += 1;
        let tau = self.cfg.tau;
        self.actor_target.soft_update_from(&self.actor, tau);
        self.critic1_target.soft_update_from(&self.critic1, tau);
        self.critic2_target.soft_update_from(&self.critic2, tau);
        Ok(loss)
    }

    pub fn is_finite(&self) -> bool {
        [&self.actor, &self.actor_target, &self.critic1, &self.critic2, &self.critic1_target, &self.critic2_target]
            .iter()
            .all(|n| n.is_finite())
    }

    pub(crate) fn write_to(&self, w: &mut Writer) {
        w.str(&serde_json::to_string(&self.cfg).expect("config serializes"));
        for net in [&self.actor, &self.actor_target, &self.critic1, &self.critic2, &self.critic1_target, &self.critic2_target] {
            write_net(w, net);
        }
        for opt in [&self.actor_opt, &self.critic1_opt, &self.critic2_opt] {
            w.f64(opt.lr);
            w.u64(opt.t);
            w.vec_f64(&opt.m);
            w.vec_f64(&opt.v);
        }
        write_rng(w, &self.rng);
        w.u64(self.critic_updates);
        w.u64(self.actor_updates);
    }

    pub(crate) fn read_from(r: &mut Reader) -> Result<Self> {
        let cfg: Td3Config = serde_json::from_str(&r.str()?).map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
        let mut nets = Vec::with_capacity(6);
        for _ in 0..6 {
            nets.push(read_net(r)?);
        }
        let mut opts = Vec::with_capacity(3);
        for k in 0..3 {
            let lr = r.f64()?;
            let t = r.u64()?;
            let m = r.vec_f64()?;
            let v = r.vec_f64()?;
            let expected = nets[[0, 2, 3][k]].param_count();
            if m.len() != expected || v.len() != expected {
                return Err(Error::Checkpoint("optimizer state does not match network".into()));
            }
            let mut opt = Adam::new(expected, lr);
            opt.t = t;
            opt.m = m;
            opt.v = v;
            opts.push(opt);
        }
        let rng = read_rng(r)?;
        let critic_updates = r.u64()?;
        let actor_updates = r.u64()?;
        let mut nets = nets.into_iter();
        let mut opts = opts.into_iter();
        let mut next = || nets.next().expect("six networks");
        Ok(Self {
            cfg,
            actor: next(),
            actor_target: next(),
            critic1: next(),
            critic2: next(),
            critic1_target: next(),
            critic2_target: next(),
            actor_opt: opts.next().expect("three optimizers"),
            critic1_opt: opts.next().expect("three optimizers"),
            critic2_opt: opts.next().expect("three optimizers"),
            rng,
            critic_updates,
            actor_updates,
        })
    }

    /// Standalone learner checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(MAGIC, FORMAT_VERSION);
        self.write_to(&mut w);
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let (mut r, version) = Reader::open(&bytes, MAGIC)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let agent = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(agent)
    }
}

fn regress(net: &mut Mlp, opt: &mut Adam, input: &[f64], y: &[f64]) -> Result<f64> {
    let n = y.len();
    let cache = net.forward(input, n)?;
    let diff: Vec<f64> = cache.output().iter().zip(y).map(|(q, t)| q - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n as f64;
    let upstream: Vec<f64> = diff.iter().map(|d| 2.0 * d / n as f64).collect();
    let mut grads = vec![0.0; net.param_count()];
    net.backward(&cache, &upstream, &mut grads, false)?;
    opt.step(net, &grads);
    Ok(loss)
}

pub(crate) fn write_net(w: &mut Writer, net: &Mlp) {
    w.u64(net.sizes().len() as u64);
    for &s in net.sizes() {
        w.u64(s as u64);
    }
    w.u8(match net.output_activation() {
        OutputActivation::Tanh => 0,
        OutputActivation::Linear => 1,
    });
    w.vec_f64(net.params());
}

pub(crate) fn read_net(r: &mut Reader) -> Result<Mlp> {
    let layers = r.u64()? as usize;
    if layers > 64 {
        return Err(Error::Checkpoint("implausible layer count".into()));
    }
    let sizes = (0..layers).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let output = match r.u8()? {
        0 => OutputActivation::Tanh,
        1 => OutputActivation::Linear,
        other => return Err(Error::Checkpoint(format!("unknown activation tag {other}"))),
    };
    let mut net = Mlp::zeros(&sizes, output).map_err(|e| Error::Checkpoint(e.to_string()))?;
    net.set_params(&r.vec_f64()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> Td3Config {
        Td3Config {
            hidden: vec![16, 16],
            batch_size: 8,
            ..Td3Config::default()
        }
    }

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, sd: usize, ad: usize) -> Batch {
        Batch {
            size: n,
            states: (0..n * sd).map(|_| rng.random_range(-1.0..1.0)).collect(),
            actions: (0..n * ad).map(|_| rng.random_range(-1.0..1.0)).collect(),
            rewards: (0..n).map(|_| rng.random_range(-2.0..1.0)).collect(),
            next_states: (0..n * sd).map(|_| rng.random_range(-1.0..1.0)).collect(),
            dones: (0..n).map(|k| k % 5 == 0).collect(),
        }
    }

    #[test]
    fn target_arithmetic() {
        assert!((td3_target(1.0, false, 0.99, 2.0, 5.0) - 2.98).abs() < 1e-12);
        assert_eq!(td3_target(1.5, true, 0.99, 2.0, 5.0), 1.5);
    }

    #[test]
    fn noise_schedule_points() {
        assert_eq!(exploration_noise_sigma(0), 0.5);
        assert_eq!(exploration_noise_sigma(2_000_000), 0.25);
        assert_eq!(exploration_noise_sigma(4_000_000), 0.02);
        assert_eq!(exploration_noise_sigma(9_000_000), 0.02);
    }

    #[test]
    fn twin_critics_with_equal_init_stay_equal() {
        let mut agent = Td3Agent::with_dims(5, 2, small_cfg(), 3).unwrap();
        agent.critic2 = agent.critic1.clone();
        agent.critic2_target = agent.critic1_target.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let b = random_batch(&mut rng, 8, 5, 2);
            let (l1, l2) = agent.critic_update(&b).unwrap();
            assert_eq!(l1, l2);
        }
        assert_eq!(agent.critic1, agent.critic2);
    }

    #[test]
    fn actor_updates_follow_policy_delay() {
        let mut agent = Td3Agent::with_dims(5, 2, Td3Config { policy_delay: 3, ..small_cfg() }, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in 1..=10u64 {
            let b = random_batch(&mut rng, 8, 5, 2);
            agent.update_with_batch(&b).unwrap();
            assert_eq!(agent.critic_updates(), k);
            let diff = agent.critic_updates() - agent.actor_updates() * 3;
            assert!(diff <= 2);
        }
    }

    #[test]
    fn tau_one_copies_online_networks() {
        let mut agent = Td3Agent::with_dims(5, 2, Td3Config { tau: 1.0, policy_delay: 1, ..small_cfg() }, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = random_batch(&mut rng, 8, 5, 2);
        agent.update_with_batch(&b).unwrap();
        assert_eq!(agent.actor, agent.actor_target);
        assert_eq!(agent.critic1, agent.critic1_target);
        assert_eq!(agent.critic2, agent.critic2_target);
    }

    #[test]
    fn constant_critic_gives_zero_actor_gradient() {
        let mut agent = Td3Agent::with_dims(5, 2, Td3Config { policy_delay: 1, ..small_cfg() }, 6).unwrap();
        // A critic whose output layer weights are zero ignores its input.
        let n = agent.critic1.param_count();
        let last = 16 + 1;
        for p in &mut agent.critic1.params_mut()[n - last..n - 1] {
            *p = 0.0;
        }
        let before = agent.actor.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let b = random_batch(&mut rng, 8, 5, 2);
        agent.actor_update(&b).unwrap();
        assert_eq!(agent.actor, before);
    }

    #[test]
    fn checkpoint_round_trip_replays_updates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.ckpt");
        let buffer = ReplayBuffer::new(64).unwrap();
        let mut agent = Td3Agent::new(Td3Config { hidden: vec![8], batch_size: 4, ..Td3Config::default() }, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..16 {
            let s: Vec<f64> = (0..STATE_DIM).map(|_| rng.random_range(0.0..1.0)).collect();
            let state = crate::meta_env::MetaState::from_vec(s).unwrap();
            buffer.push(&crate::meta_env::Transition {
                state: state.clone(),
                action: [0.1; ACTION_DIM],
                reward: -1.0,
                next_state: state,
                done: false,
            });
        }
        agent.update(&buffer).unwrap();
        agent.save(&path).unwrap();
        let mut restored = Td3Agent::load(&path).unwrap();
        for _ in 0..3 {
            let a = agent.update(&buffer).unwrap();
            let b = restored.update(&buffer).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(agent.actor, restored.actor);
        assert_eq!(agent.critic2_target, restored.critic2_target);
    }
}
