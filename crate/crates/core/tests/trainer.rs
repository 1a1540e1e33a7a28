use std::path::Path;
use std::time::Instant;

use navtune_core::meta_env::ACTION_DIM;
use navtune_core::td3::NoiseSchedule;
use navtune_core::trainer::{assignment, load_policy, updates_due, worker_seed, METRICS_FILE, METRICS_HEADER};
use navtune_core::{build_env, train, CaConfig, EnvSpec, MetaEnv, MetaEnvConfig, ReplayBuffer, Td3Agent, Td3Config, TrainConfig, TrainSetup, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn suite(n: usize) -> Vec<EnvSpec> {
    let cfg = MetaEnvConfig::default();
    (0..n).map(|i| build_env(i, 500 + i as u64, &CaConfig::default(), cfg.resolution, &cfg.robot).unwrap()).collect()
}

fn small_td3() -> Td3Config {
    Td3Config {
        hidden: vec![32, 32],
        batch_size: 16,
        warmup: 40,
        buffer_capacity: 10_000,
        ..Td3Config::default()
    }
}

fn setup<'a>(suite: &'a [EnvSpec], td3: Td3Config, train: TrainConfig, dir: &Path) -> TrainSetup<'a> {
    TrainSetup {
        suite,
        env: MetaEnvConfig::default(),
        td3,
        train,
        seed: 3,
        run_dir: dir.to_path_buf(),
        resume: None,
        stop: None,
    }
}

fn sync(workers: usize, total_steps: u64) -> TrainConfig {
    TrainConfig {
        workers,
        total_steps,
        synchronous: true,
        checkpoint_interval: 0,
        ..TrainConfig::default()
    }
}

fn metric_rows(dir: &Path) -> Vec<Vec<f64>> {
    let csv = std::fs::read_to_string(dir.join(METRICS_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(METRICS_HEADER));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn update_schedule() {
    assert_eq!(updates_due(100, 200, 1.0), 0);
    assert_eq!(updates_due(200, 200, 1.0), 0);
    assert_eq!(updates_due(210, 200, 0.25), 2);
    assert_eq!(updates_due(1200, 200, 1.0), 1000);
    assert_eq!(worker_seed(7, 2), 7 + 2_000_000);
    let all: Vec<usize> = (0..3).flat_map(|w| assignment(w, 3, 10)).collect();
    let mut sorted = all.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..10).collect::<Vec<_>>());
}

#[test]
fn frozen_policy_repeats_identical_episodes() {
    let envs = suite(1);
    let dir = tempfile::tempdir().unwrap();
    let td3 = Td3Config {
        warmup: 0,
        noise: NoiseSchedule {
            initial: 0.0,
            decay_per_million: 0.0,
            floor: 0.0,
        },
        ..small_td3()
    };
    let train_cfg = TrainConfig { utd: 0.0, ..sync(1, 60) };
    let out = train(&setup(&envs, td3, train_cfg, dir.path())).unwrap();
    assert_eq!(out.updates, 0);
    let rows = metric_rows(dir.path());
    assert!(rows.len() >= 3);
    for r in &rows {
        // Moving averages of equal values, up to summation rounding.
        assert!((r[2] - rows[0][2]).abs() < 1e-12);
        assert!((r[3] - rows[0][3]).abs() < 1e-12);
    }
}

#[test]
fn every_decision_is_one_transition() {
    let envs = suite(2);
    let dir = tempfile::tempdir().unwrap();
    let out = train(&setup(&envs, small_td3(), sync(2, 37), dir.path())).unwrap();
    assert_eq!(out.env_steps, 37);
    assert_eq!(out.buffer_pushes, 37);
    assert_eq!(out.worker_episodes.iter().sum::<u64>(), out.episodes);
}

#[test]
fn no_updates_during_warmup() {
    let envs = suite(1);
    let dir = tempfile::tempdir().unwrap();
    let out = train(&setup(&envs, small_td3(), sync(1, 40), dir.path())).unwrap();
    assert_eq!((out.updates, out.actor_updates, out.snapshots), (0, 0, 0));
}

#[test]
fn snapshots_follow_the_sync_interval() {
    let envs = suite(2);
    let dir = tempfile::tempdir().unwrap();
    let td3 = Td3Config { warmup: 100, ..small_td3() };
    let train_cfg = TrainConfig { sync_interval: 100, ..sync(2, 1100) };
    let out = train(&setup(&envs, td3, train_cfg, dir.path())).unwrap();
    assert_eq!(out.updates, 1000);
    assert_eq!(out.actor_updates, 500);
    assert_eq!(out.snapshots, 10);
}

/// One worker in lockstep with a snapshot after every update is plain TD3:
/// act, store, update. Reproduced here without the trainer.
#[test]
fn single_worker_sync_matches_a_plain_loop() {
    let envs = suite(3);
    let td3 = small_td3();
    let (seed, total) = (3u64, 150u64);
    let env_cfg = MetaEnvConfig::default();

    let mut agent = Td3Agent::new(td3.clone(), seed).unwrap();
    let buffer = ReplayBuffer::new(td3.buffer_capacity).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(seed, 0));
    let mut current: Option<(MetaEnv, navtune_core::MetaState)> = None;
    for step in 0..total {
        if current.is_none() {
            let slot = rng.random_range(0..envs.len());
            let mut env = MetaEnv::new(&envs[slot], env_cfg);
            let s = env.reset().unwrap();
            current = Some((env, s));
        }
        let (env, state) = current.as_mut().unwrap();
        let mut a = [0.0; ACTION_DIM];
        if step < td3.warmup {
            for v in &mut a {
                *v = rng.random_range(-1.0..=1.0);
            }
        } else {
            let mean = agent.act(state.as_slice()).unwrap();
            let sigma = td3.noise.sigma(step);
            for (v, m) in a.iter_mut().zip(mean) {
                let z: f64 = rng.sample(StandardNormal);
                *v = (m + sigma * z).clamp(-1.0, 1.0);
            }
        }
        let out = env.step(&a).unwrap();
        buffer.push(&Transition {
            state: state.clone(),
            action: a,
            reward: out.reward,
            next_state: out.state.clone(),
            done: out.terminal,
        });
        *state = out.state;
        if out.done {
            current = None;
        }
        while agent.critic_updates() < updates_due(step + 1, td3.warmup, 1.0) {
            agent.update(&buffer).unwrap();
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let train_cfg = TrainConfig { sync_interval: 1, utd: 1.0, ..sync(1, total) };
    let out = train(&setup(&envs, td3, train_cfg, dir.path())).unwrap();
    assert_eq!(out.updates, agent.critic_updates());
    let learned = load_policy(&dir.path().join("policy.bin")).unwrap();
    assert_eq!(learned.params(), agent.actor.params());
}

#[test]
fn zero_budget_writes_checkpoint_and_header_only() {
    let envs = suite(1);
    let dir = tempfile::tempdir().unwrap();
    let out = train(&setup(&envs, small_td3(), sync(1, 0), dir.path())).unwrap();
    assert_eq!(out.env_steps, 0);
    assert!(dir.path().join("checkpoint.bin").exists());
    assert!(dir.path().join("policy.bin").exists());
    assert_eq!(std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap(), format!("{METRICS_HEADER}\n"));
}

#[test]
fn async_run_completes_its_budget() {
    let envs = suite(4);
    let dir = tempfile::tempdir().unwrap();
    let train_cfg = TrainConfig {
        workers: 4,
        total_steps: 400,
        utd: 0.5,
        sync_interval: 10,
        checkpoint_interval: 100,
        ..TrainConfig::default()
    };
    let out = train(&setup(&envs, small_td3(), train_cfg, dir.path())).unwrap();
    assert_eq!(out.env_steps, 400);
    assert_eq!(out.buffer_pushes, 400);
    assert_eq!(out.updates, updates_due(400, 40, 0.5));
    assert!(!out.interrupted);
    let rows = metric_rows(dir.path());
    assert!(rows.windows(2).all(|w| w[0][0] <= w[1][0]));
}

#[test]
fn smoke_run_with_default_networks() {
    let envs = suite(1);
    let dir = tempfile::tempdir().unwrap();
    let td3 = Td3Config {
        warmup: 1000,
        batch_size: 64,
        ..Td3Config::default()
    };
    let train_cfg = TrainConfig { utd: 0.25, ..sync(1, 2000) };
    let t = Instant::now();
    let out = train(&setup(&envs, td3, train_cfg, dir.path())).unwrap();
    assert!(t.elapsed().as_secs() < 300);
    assert_eq!(out.updates, 250);
    let actor = load_policy(&dir.path().join("policy.bin")).unwrap();
    assert!(actor.params().iter().all(|p| p.is_finite()));
}

#[test]
fn resume_rejects_a_different_configuration() {
    let envs = suite(1);
    let dir = tempfile::tempdir().unwrap();
    train(&setup(&envs, small_td3(), sync(1, 20), dir.path())).unwrap();
    let mut s = setup(&envs, Td3Config { gamma: 0.9, ..small_td3() }, sync(1, 40), dir.path());
    s.resume = Some(dir.path().join("checkpoint.bin"));
    assert!(train(&s).is_err());
    let mut ok = setup(&envs, small_td3(), sync(1, 40), dir.path());
    ok.resume = Some(dir.path().join("checkpoint.bin"));
    assert_eq!(train(&ok).unwrap().env_steps, 40);
}
