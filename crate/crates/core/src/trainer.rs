//! Actor/learner training: workers drive meta-environments and push into one
//! shared replay buffer; a single learner updates TD3 and publishes policy
//! snapshots.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use log::{info, warn};
use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::binio::{read_file, read_rng, write_rng, Reader, Writer};
use crate::envgen::EnvSpec;
use crate::error::{Error, Result};
use crate::meta_env::{MetaEnv, MetaEnvConfig, MetaState, Transition, ACTION_DIM};
use crate::nav::NavWorld;
use crate::td3::agent::{read_net, write_net};
use crate::td3::{Mlp, ReplayBuffer, Td3Agent, Td3Config};

const CKPT_MAGIC: &[u8; 8] = b"NTTRAIN\0";
const POLICY_MAGIC: &[u8; 8] = b"NTPOLCY\0";
const FORMAT_VERSION: u32 = 1;

/// Header of the learning-curve CSV.
pub const METRICS_HEADER: &str = "env_steps,updates,avg_return_100,avg_length_100";

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const POLICY_FILE: &str = "policy.bin";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub workers: usize,
    /// Total environment decision steps across all workers.
    pub total_steps: u64,
    /// Learner updates per collected decision step.
    pub utd: f64,
    /// Learner updates between policy snapshots.
    pub sync_interval: u64,
    /// Decision steps between full checkpoints; 0 disables periodic ones.
    pub checkpoint_interval: u64,
    /// Lockstep workers and learner; reproducible bit for bit.
    pub synchronous: bool,
    pub metrics_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            workers: 4,
            total_steps: 150_000,
            utd: 1.0,
            sync_interval: 100,
            checkpoint_interval: 10_000,
            synchronous: false,
            metrics_window: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("train.workers must be at least 1".into()));
        }
        if !(self.utd.is_finite() && self.utd >= 0.0) {
            return Err(Error::Config("train.utd must be non-negative".into()));
        }
        if self.sync_interval == 0 {
            return Err(Error::Config("train.sync_interval must be at least 1".into()));
        }
        if self.metrics_window == 0 {
            return Err(Error::Config("train.metrics_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Immutable actor copy handed to workers.
#[derive(Debug, Clone)]
pub struct PolicySnapshot {
    pub version: u64,
    pub env_steps: u64,
    pub actor: Mlp,
}

/// Latest snapshot; readers always see a complete one.
#[derive(Debug)]
pub struct SnapshotCell {
    inner: RwLock<Arc<PolicySnapshot>>,
}

impl SnapshotCell {
    pub fn new(s: PolicySnapshot) -> Self {
        Self {
            inner: RwLock::new(Arc::new(s)),
        }
    }

    pub fn latest(&self) -> Arc<PolicySnapshot> {
        Arc::clone(&self.inner.read())
    }

    pub fn publish(&self, s: PolicySnapshot) {
        *self.inner.write() = Arc::new(s);
    }
}

/// Train-suite indices handled by `worker`: round-robin over the suite, or a
/// single shared environment when workers outnumber environments.
pub fn assignment(worker: usize, workers: usize, envs: usize) -> Vec<usize> {
    if envs == 0 {
        return Vec::new();
    }
    if workers >= envs {
        return vec![worker % envs];
    }
    (0..envs).filter(|k| k % workers == worker).collect()
}

/// Seed of worker `id`.
pub fn worker_seed(master: u64, id: usize) -> u64 {
    master.wrapping_add(id as u64 * 1_000_000)
}

/// Learner updates owed after `env_steps` collected decisions.
pub fn updates_due(env_steps: u64, warmup: u64, utd: f64) -> u64 {
    if env_steps <= warmup {
        0
    } else {
        ((env_steps - warmup) as f64 * utd).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeEnd {
    pub worker: usize,
    pub env_index: usize,
    pub episode_return: f64,
    pub length: u32,
    pub reached_goal: bool,
}

struct Episode {
    slot: usize,
    env: MetaEnv,
    state: MetaState,
    actions: Vec<[f64; ACTION_DIM]>,
    ret: f64,
}

struct Worker {
    id: usize,
    envs: Vec<usize>,
    rng: ChaCha8Rng,
    snapshot: Arc<PolicySnapshot>,
    episode: Option<Episode>,
    episodes: u64,
}

/// Shared, read-only inputs of every worker.
struct Shared<'a> {
    suite: &'a [EnvSpec],
    worlds: Vec<Arc<NavWorld>>,
    env_cfg: MetaEnvConfig,
    td3: &'a Td3Config,
}

impl Worker {
    fn new(id: usize, workers: usize, n_envs: usize, seed: u64, snapshot: Arc<PolicySnapshot>) -> Self {
        Self {
            id,
            envs: assignment(id, workers, n_envs),
            rng: ChaCha8Rng::seed_from_u64(seed),
            snapshot,
            episode: None,
            episodes: 0,
        }
    }

    fn open_env(&self, shared: &Shared, slot: usize) -> MetaEnv {
        let spec = &shared.suite[slot];
        MetaEnv::with_world(Arc::clone(&shared.worlds[slot]), spec.start, spec.goal, shared.env_cfg)
    }

    fn begin(&mut self, shared: &Shared) -> Result<()> {
        loop {
            if self.envs.is_empty() {
                return Err(Error::Config(format!("worker {} has no usable environments", self.id)));
            }
            let pick = self.rng.random_range(0..self.envs.len());
            let slot = self.envs[pick];
            let mut env = self.open_env(shared, slot);
            match env.reset() {
                Ok(state) => {
                    self.episode = Some(Episode {
                        slot,
                        env,
                        state,
                        actions: Vec::new(),
                        ret: 0.0,
                    });
                    return Ok(());
                }
                Err(e) => {
                    warn!("worker {}: skipping environment {}: {e}", self.id, shared.suite[slot].index);
                    self.envs.remove(pick);
                }
            }
        }
    }

    fn choose_action(&mut self, state: &MetaState, env_steps: u64, td3: &Td3Config) -> Result<[f64; ACTION_DIM]> {
        let mut a = [0.0; ACTION_DIM];
        if env_steps < td3.warmup {
            for v in &mut a {
                *v = self.rng.random_range(-1.0..=1.0);
            }
            return Ok(a);
        }
        let mean = self.snapshot.actor.predict(state.as_slice())?;
        let sigma = td3.noise.sigma(env_steps);
        for (v, m) in a.iter_mut().zip(mean) {
            let z: f64 = self.rng.sample(StandardNormal);
            *v = (m + sigma * z).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Take one decision step, pushing its transition into `buffer`.
    fn step(&mut self, shared: &Shared, snapshots: &SnapshotCell, buffer: &ReplayBuffer, env_steps: u64) -> Result<Option<EpisodeEnd>> {
        if self.episode.is_none() {
            self.begin(shared)?;
        }
        self.snapshot = snapshots.latest();
        let state = self.episode.as_ref().expect("episode started").state.clone();
        let action = self.choose_action(&state, env_steps, shared.td3)?;
        let ep = self.episode.as_mut().expect("episode started");
        let out = ep.env.step(&action)?;
        buffer.push(&Transition {
            state,
            action,
            reward: out.reward,
            next_state: out.state.clone(),
            done: out.terminal,
        });
        ep.actions.push(action);
        ep.ret += out.reward;
        ep.state = out.state;
        if !out.done {
            return Ok(None);
        }
        let ep = self.episode.take().expect("episode started");
        self.episodes += 1;
        Ok(Some(EpisodeEnd {
            worker: self.id,
            env_index: shared.suite[ep.slot].index,
            episode_return: ep.ret,
            length: ep.actions.len() as u32,
            reached_goal: out.info.reached_goal,
        }))
    }

    fn write_to(&self, w: &mut Writer) {
        w.u64(self.id as u64);
        w.u64(self.envs.len() as u64);
        for &e in &self.envs {
            w.u64(e as u64);
        }
        write_rng(w, &self.rng);
        w.u64(self.episodes);
        w.u64(self.snapshot.version);
        w.u64(self.snapshot.env_steps);
        write_net(w, &self.snapshot.actor);
        match &self.episode {
            None => w.u8(0),
            Some(ep) => {
                w.u8(1);
                w.u64(ep.slot as u64);
                w.f64(ep.ret);
                w.u64(ep.actions.len() as u64);
                for a in &ep.actions {
                    w.f64s(a);
                }
            }
        }
    }

    fn read_from(r: &mut Reader, shared: &Shared) -> Result<Self> {
        let id = r.u64()? as usize;
        let n = r.u64()? as usize;
        let envs = (0..n).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        if envs.iter().any(|&e| e >= shared.suite.len()) {
            return Err(Error::Checkpoint("worker references an unknown environment".into()));
        }
        let rng = read_rng(r)?;
        let episodes = r.u64()?;
        let snapshot = Arc::new(PolicySnapshot {
            version: r.u64()?,
            env_steps: r.u64()?,
            actor: read_net(r)?,
        });
        let mut worker = Self {
            id,
            envs,
            rng,
            snapshot,
            episode: None,
            episodes,
        };
        if r.u8()? == 1 {
            let slot = r.u64()? as usize;
            if slot >= shared.suite.len() {
                return Err(Error::Checkpoint("episode references an unknown environment".into()));
            }
            let ret = r.f64()?;
            let len = r.u64()? as usize;
            let mut env = worker.open_env(shared, slot);
            // The simulator is deterministic, so replaying the logged actions
            // restores the in-flight episode exactly.
            let mut state = env.reset()?;
            let mut actions = Vec::with_capacity(len);
            for _ in 0..len {
                let a: [f64; ACTION_DIM] = r.f64s(ACTION_DIM)?.try_into().expect("action length");
                state = env.step(&a)?.state;
                actions.push(a);
            }
            worker.episode = Some(Episode {
                slot,
                env,
                state,
                actions,
                ret,
            });
        }
        Ok(worker)
    }
}

/// Moving-average episode statistics and the CSV rows produced so far.
#[derive(Debug, Clone, Default)]
struct Metrics {
    window: usize,
    returns: VecDeque<f64>,
    lengths: VecDeque<f64>,
    episodes: u64,
    csv: String,
}

impl Metrics {
    fn new(window: usize) -> Self {
        Self {
            window,
            csv: format!("{METRICS_HEADER}\n"),
            ..Self::default()
        }
    }

    fn record(&mut self, end: &EpisodeEnd, env_steps: u64, updates: u64) {
        if self.returns.len() == self.window {
            self.returns.pop_front();
            self.lengths.pop_front();
        }
        self.returns.push_back(end.episode_return);
        self.lengths.push_back(end.length as f64);
        self.episodes += 1;
        let n = self.returns.len() as f64;
        let r = self.returns.iter().sum::<f64>() / n;
        let l = self.lengths.iter().sum::<f64>() / n;
        let _ = writeln!(self.csv, "{env_steps},{updates},{r},{l}");
    }

    fn write_to(&self, w: &mut Writer) {
        w.u64(self.window as u64);
        w.vec_f64(&self.returns.iter().copied().collect::<Vec<_>>());
        w.vec_f64(&self.lengths.iter().copied().collect::<Vec<_>>());
        w.u64(self.episodes);
        w.str(&self.csv);
    }

    fn read_from(r: &mut Reader) -> Result<Self> {
        Ok(Self {
            window: r.u64()? as usize,
            returns: r.vec_f64()?.into(),
            lengths: r.vec_f64()?.into(),
            episodes: r.u64()?,
            csv: r.str()?,
        })
    }
}

/// Summary of a finished (or interrupted) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub env_steps: u64,
    pub updates: u64,
    pub actor_updates: u64,
    pub snapshots: u64,
    pub episodes: u64,
    pub worker_episodes: Vec<u64>,
    pub buffer_pushes: u64,
    pub interrupted: bool,
    pub wall_seconds: f64,
}

/// Inputs of a training run.
pub struct TrainSetup<'a> {
    pub suite: &'a [EnvSpec],
    pub env: MetaEnvConfig,
    pub td3: Td3Config,
    pub train: TrainConfig,
    pub seed: u64,
    pub run_dir: PathBuf,
    /// Checkpoint to continue from.
    pub resume: Option<PathBuf>,
    /// Raised externally to request checkpoint-then-exit.
    pub stop: Option<Arc<AtomicBool>>,
}

struct LearnerState {
    agent: Td3Agent,
    buffer: Arc<ReplayBuffer>,
    snapshots: Arc<SnapshotCell>,
    published: u64,
    env_steps: u64,
    metrics: Metrics,
    next_checkpoint: u64,
}

fn snapshot_of(agent: &Td3Agent, version: u64, env_steps: u64) -> PolicySnapshot {
    PolicySnapshot {
        version,
        env_steps,
        actor: agent.actor.clone(),
    }
}

fn publish_if_due(ls: &mut LearnerState, sync_interval: u64) {
    if ls.agent.critic_updates() % sync_interval == 0 {
        ls.published += 1;
        ls.snapshots.publish(snapshot_of(&ls.agent, ls.published, ls.env_steps));
    }
}

fn config_fingerprint(setup: &TrainSetup) -> String {
    serde_json::json!({
        "env": setup.env,
        "td3": setup.td3,
        "workers": setup.train.workers,
        "utd": setup.train.utd,
        "sync_interval": setup.train.sync_interval,
        "synchronous": setup.train.synchronous,
        "metrics_window": setup.train.metrics_window,
        "seed": setup.seed,
        "suite": setup.suite.iter().map(|e| e.seed).collect::<Vec<_>>(),
    })
    .to_string()
}

fn save_checkpoint(setup: &TrainSetup, ls: &LearnerState, workers: &[Worker]) -> Result<()> {
    let mut w = Writer::new(CKPT_MAGIC, FORMAT_VERSION);
    w.str(&config_fingerprint(setup));
    w.u64(ls.env_steps);
    w.u64(ls.published);
    let snap = ls.snapshots.latest();
    w.u64(snap.version);
    w.u64(snap.env_steps);
    write_net(&mut w, &snap.actor);
    ls.agent.write_to(&mut w);
    ls.buffer.write_to(&mut w);
    ls.metrics.write_to(&mut w);
    w.u64(workers.len() as u64);
    for wk in workers {
        wk.write_to(&mut w);
    }
    w.save(&setup.run_dir.join(CHECKPOINT_FILE))?;
    save_policy(&setup.run_dir.join(POLICY_FILE), &ls.agent.actor)?;
    write_metrics(&setup.run_dir, &ls.metrics)
}

fn write_metrics(dir: &Path, m: &Metrics) -> Result<()> {
    let path = dir.join(METRICS_FILE);
    std::fs::write(&path, &m.csv).map_err(|e| Error::io(path, e))
}

/// Save a bare actor network for evaluation.
pub fn save_policy(path: &Path, actor: &Mlp) -> Result<()> {
    let mut w = Writer::new(POLICY_MAGIC, FORMAT_VERSION);
    write_net(&mut w, actor);
    w.save(path)
}

/// Load an actor from a policy file, a learner checkpoint, or a trainer checkpoint.
pub fn load_policy(path: &Path) -> Result<Mlp> {
    let bytes = read_file(path)?;
    if let Ok((mut r, _)) = Reader::open(&bytes, POLICY_MAGIC) {
        let net = read_net(&mut r)?;
        r.finish()?;
        return Ok(net);
    }
    if let Ok((mut r, _)) = Reader::open(&bytes, CKPT_MAGIC) {
        let _fingerprint = r.str()?;
        let _ = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
        let _snapshot = read_net(&mut r)?;
        return Ok(Td3Agent::read_from(&mut r)?.actor);
    }
    Ok(Td3Agent::load(path)?.actor)
}

/// Run (or resume) training. Writes metrics, checkpoints and the final
/// policy under `setup.run_dir`.
pub fn train(setup: &TrainSetup) -> Result<TrainOutcome> {
    setup.train.validate()?;
    setup.td3.validate()?;
    setup.env.validate()?;
    if setup.suite.is_empty() {
        return Err(Error::Config("training suite is empty".into()));
    }
    std::fs::create_dir_all(&setup.run_dir).map_err(|e| Error::io(&setup.run_dir, e))?;
    let shared = Shared {
        suite: setup.suite,
        worlds: setup.suite.iter().map(|e| Arc::new(NavWorld::new(e.grid.clone(), &setup.env.robot))).collect(),
        env_cfg: setup.env,
        td3: &setup.td3,
    };
    let (mut ls, mut workers) = match &setup.resume {
        Some(path) => restore(setup, &shared, path)?,
        None => fresh(setup)?,
    };
    let started = Instant::now();
    let interrupted = if setup.train.total_steps == 0 {
        false
    } else if setup.train.synchronous {
        run_sync(setup, &shared, &mut ls, &mut workers)?
    } else {
        run_async(setup, &shared, &mut ls, &mut workers)?
    };
    save_checkpoint(setup, &ls, &workers)?;
    let outcome = TrainOutcome {
        env_steps: ls.env_steps,
        updates: ls.agent.critic_updates(),
        actor_updates: ls.agent.actor_updates(),
        snapshots: ls.published,
        episodes: ls.metrics.episodes,
        worker_episodes: workers.iter().map(|w| w.episodes).collect(),
        buffer_pushes: ls.buffer.pushes(),
        interrupted,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    info!(
        "training stopped at {} steps, {} updates, {} episodes{}",
        outcome.env_steps,
        outcome.updates,
        outcome.episodes,
        if interrupted { " (interrupted)" } else { "" }
    );
    Ok(outcome)
}

fn fresh(setup: &TrainSetup) -> Result<(LearnerState, Vec<Worker>)> {
    let agent = Td3Agent::new(setup.td3.clone(), setup.seed)?;
    let snapshots = Arc::new(SnapshotCell::new(snapshot_of(&agent, 0, 0)));
    let workers = (0..setup.train.workers)
        .map(|id| Worker::new(id, setup.train.workers, setup.suite.len(), worker_seed(setup.seed, id), snapshots.latest()))
        .collect();
    let interval = setup.train.checkpoint_interval;
    Ok((
        LearnerState {
            agent,
            buffer: Arc::new(ReplayBuffer::new(setup.td3.buffer_capacity)?),
            snapshots,
            published: 0,
            env_steps: 0,
            metrics: Metrics::new(setup.train.metrics_window),
            next_checkpoint: if interval == 0 { u64::MAX } else { interval },
        },
        workers,
    ))
}

fn restore(setup: &TrainSetup, shared: &Shared, path: &Path) -> Result<(LearnerState, Vec<Worker>)> {
    let bytes = read_file(path)?;
    let (mut r, version) = Reader::open(&bytes, CKPT_MAGIC)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    if r.str()? != config_fingerprint(setup) {
        return Err(Error::Checkpoint("checkpoint was written under a different configuration".into()));
    }
    let env_steps = r.u64()?;
    let published = r.u64()?;
    let snapshot = PolicySnapshot {
        version: r.u64()?,
        env_steps: r.u64()?,
        actor: read_net(&mut r)?,
    };
    let agent = Td3Agent::read_from(&mut r)?;
    let buffer = ReplayBuffer::read_from(&mut r)?;
    let metrics = Metrics::read_from(&mut r)?;
    let n = r.u64()? as usize;
    let mut workers = (0..n).map(|_| Worker::read_from(&mut r, shared)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    if !setup.train.synchronous || workers.len() != setup.train.workers {
        // Free-running workers are not captured mid-episode; start them afresh
        // with seeds that do not repeat the earlier stream.
        let current = Arc::new(snapshot.clone());
        workers = (0..setup.train.workers)
            .map(|id| {
                let seed = worker_seed(setup.seed, id) ^ env_steps.rotate_left(32);
                Worker::new(id, setup.train.workers, setup.suite.len(), seed, Arc::clone(&current))
            })
            .collect();
    }
    let interval = setup.train.checkpoint_interval;
    let next_checkpoint = if interval == 0 { u64::MAX } else { (env_steps / interval + 1) * interval };
    Ok((
        LearnerState {
            agent,
            buffer: Arc::new(buffer),
            snapshots: Arc::new(SnapshotCell::new(snapshot)),
            published,
            env_steps,
            metrics,
            next_checkpoint,
        },
        workers,
    ))
}

fn stop_requested(setup: &TrainSetup) -> bool {
    setup.stop.as_ref().is_some_and(|s| s.load(Ordering::SeqCst))
}

fn run_sync(setup: &TrainSetup, shared: &Shared, ls: &mut LearnerState, workers: &mut [Worker]) -> Result<bool> {
    let cfg = &setup.train;
    let total = cfg.total_steps;
    while ls.env_steps < total {
        if stop_requested(setup) {
            return Ok(true);
        }
        for w in workers.iter_mut() {
            if ls.env_steps >= total {
                break;
            }
            let end = w.step(shared, &ls.snapshots, &ls.buffer, ls.env_steps)?;
            ls.env_steps += 1;
            if let Some(end) = end {
                ls.metrics.record(&end, ls.env_steps, ls.agent.critic_updates());
            }
        }
        let due = updates_due(ls.env_steps, setup.td3.warmup, cfg.utd);
        while ls.agent.critic_updates() < due {
            ls.agent.update(&ls.buffer)?;
            publish_if_due(ls, cfg.sync_interval);
        }
        if ls.env_steps >= ls.next_checkpoint {
            save_checkpoint(setup, ls, workers)?;
            ls.next_checkpoint += cfg.checkpoint_interval;
        }
    }
    Ok(false)
}

enum WorkerMsg {
    Episode(EpisodeEnd),
    Failed(usize, Error),
}

fn run_async(setup: &TrainSetup, shared: &Shared, ls: &mut LearnerState, workers: &mut Vec<Worker>) -> Result<bool> {
    let cfg = &setup.train;
    let total = cfg.total_steps;
    let warmup = setup.td3.warmup;
    let reserved = AtomicU64::new(ls.env_steps);
    let updates = AtomicU64::new(ls.agent.critic_updates());
    let halt = AtomicBool::new(false);
    // Workers may run ahead of the learner by at most this many updates.
    let slack = cfg.sync_interval.max(setup.td3.batch_size as u64);
    let (tx, rx) = mpsc::channel::<WorkerMsg>();
    let mut interrupted = false;
    let mut failure: Option<Error> = None;
    let owned = std::mem::take(workers);
    let returned: Vec<std::thread::Result<Worker>> = std::thread::scope(|scope| {
        let handles: Vec<_> = owned
            .into_iter()
            .map(|mut w| {
                let tx = tx.clone();
                let (reserved, updates, halt) = (&reserved, &updates, &halt);
                let snapshots = Arc::clone(&ls.snapshots);
                let buffer = Arc::clone(&ls.buffer);
                scope.spawn(move || {
                    while !halt.load(Ordering::SeqCst) {
                        let pushed = buffer.pushes();
                        if updates_due(pushed, warmup, cfg.utd) > updates.load(Ordering::SeqCst) + slack {
                            std::thread::sleep(Duration::from_micros(200));
                            continue;
                        }
                        let step = reserved.fetch_add(1, Ordering::SeqCst);
                        if step >= total {
                            break;
                        }
                        match w.step(shared, &snapshots, &buffer, step) {
                            Ok(Some(end)) => {
                                let _ = tx.send(WorkerMsg::Episode(end));
                            }
                            Ok(None) => {}
                            Err(e) => {
                                let _ = tx.send(WorkerMsg::Failed(w.id, e));
                                break;
                            }
                        }
                    }
                    w
                })
            })
            .collect();
        drop(tx);
        loop {
            while let Ok(msg) = rx.try_recv() {
                match msg {
                    WorkerMsg::Episode(end) => {
                        let steps = ls.buffer.pushes();
                        ls.metrics.record(&end, steps, ls.agent.critic_updates());
                    }
                    WorkerMsg::Failed(id, e) => {
                        failure.get_or_insert(Error::Config(format!("worker {id} failed: {e}")));
                    }
                }
            }
            if failure.is_some() {
                halt.store(true, Ordering::SeqCst);
                break;
            }
            if stop_requested(setup) {
                interrupted = true;
                halt.store(true, Ordering::SeqCst);
                break;
            }
            let pushed = ls.buffer.pushes();
            ls.env_steps = pushed;
            let due = updates_due(pushed, warmup, cfg.utd);
            let behind = ls.agent.critic_updates() < due;
            if behind {
                if let Err(e) = ls.agent.update(&ls.buffer) {
                    failure = Some(e);
                    halt.store(true, Ordering::SeqCst);
                    break;
                }
                updates.store(ls.agent.critic_updates(), Ordering::SeqCst);
                publish_if_due(ls, cfg.sync_interval);
            }
            if pushed >= ls.next_checkpoint && pushed < total {
                if let Err(e) = save_checkpoint(setup, ls, &[]) {
                    failure = Some(e);
                    halt.store(true, Ordering::SeqCst);
                    break;
                }
                ls.next_checkpoint += cfg.checkpoint_interval;
            }
            if pushed >= total && handles.iter().all(|h| h.is_finished()) {
                break;
            }
            if !behind {
                std::thread::sleep(Duration::from_micros(200));
            }
        }
        handles.into_iter().map(|h| h.join()).collect()
    });
    for r in returned {
        match r {
            Ok(w) => workers.push(w),
            Err(_) => return Err(Error::Config("a worker thread panicked; run aborted".into())),
        }
    }
    workers.sort_by_key(|w| w.id);
    while let Ok(WorkerMsg::Episode(end)) = rx.try_recv() {
        ls.metrics.record(&end, ls.buffer.pushes(), ls.agent.critic_updates());
    }
    ls.env_steps = ls.buffer.pushes();
    if let Some(e) = failure {
        return Err(e);
    }
    if !interrupted {
        let due = updates_due(ls.env_steps, warmup, cfg.utd);
        while ls.agent.critic_updates() < due {
            ls.agent.update(&ls.buffer)?;
            publish_if_due(ls, cfg.sync_interval);
        }
    }
    Ok(interrupted)
}
