use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use navtune_core::eval::{parse_trials_csv, trials_csv, Tercile, Verdict};
use navtune_core::meta_env::FixedPolicy;
use navtune_core::sim::{OccupancyGrid, Pose2D};
use navtune_core::{build_report, run_trials, stratify, welch_t_test, EnvSpec, MetaEnvConfig, Method, Split, TrialResult};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn corridor() -> EnvSpec {
    let (w, h) = (60, 240);
    let mut grid = OccupancyGrid::new(w, h, 0.05).unwrap();
    for j in 0..h {
        grid.set(0, j, true);
        grid.set(w - 1, j, true);
    }
    for i in 0..w {
        grid.set(i, 0, true);
        grid.set(i, h - 1, true);
    }
    EnvSpec {
        index: 0,
        seed: 0,
        retries: 0,
        grid,
        start: Pose2D::new(1.525, 1.0, FRAC_PI_2),
        goal: [1.525, 11.0],
    }
}

fn result(env: usize, method: Method, times: &[Option<f64>]) -> TrialResult {
    TrialResult {
        env_index: env,
        method,
        per_trial: times.to_vec(),
    }
}

fn all(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|&t| Some(t)).collect()
}

#[test]
fn trials_without_jitter_are_identical() {
    let spec = corridor();
    let cfg = MetaEnvConfig::default();
    let mut policy = FixedPolicy(cfg.dwa.bounds.defaults());
    let (r, _) = run_trials(&spec, &cfg, Method::Fixed, &mut policy, 4, 0.0, 1).unwrap();
    assert_eq!(r.failures(), 0);
    assert!(r.per_trial.iter().all(|t| *t == r.per_trial[0]));
}

#[test]
fn jittered_corridor_times_vary_little() {
    let spec = corridor();
    let cfg = MetaEnvConfig::default();
    let mut policy = FixedPolicy(cfg.dwa.bounds.defaults());
    let (r, runs) = run_trials(&spec, &cfg, Method::Fixed, &mut policy, 20, 0.05, 9).unwrap();
    assert_eq!(r.failures(), 0);
    assert_eq!(runs.len(), 20);
    let t = r.times();
    let m = r.mean().unwrap();
    let sd = (t.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (t.len() - 1) as f64).sqrt();
    assert!(sd / m < 0.1, "cv {}", sd / m);
    // Repeating the protocol with the same seed reproduces it exactly.
    let (again, _) = run_trials(&spec, &cfg, Method::Fixed, &mut policy, 20, 0.05, 9).unwrap();
    assert_eq!(again, r);
}

#[test]
fn welch_matches_reference_values() {
    // Reference: t = -1 with 8 degrees of freedom.
    let (t, p) = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    assert!((t + 1.0).abs() < 1e-12);
    let want = 2.0 * StudentsT::new(0.0, 1.0, 8.0).unwrap().cdf(-1.0);
    assert!((p - want).abs() < 1e-9);
    assert!((p - 0.34659350708733416).abs() < 1e-9);

    let a: Vec<f64> = (0..20).map(|k| 10.0 - 0.5 + k as f64 / 19.0).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
    let (t, p) = welch_t_test(&a, &b).unwrap();
    assert!(t < 0.0 && p < 1e-6);
    assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    assert_eq!(welch_t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap(), (f64::NEG_INFINITY, 0.0));
}

#[test]
fn ten_environments_form_three_four_three() {
    let base: Vec<(usize, Option<f64>)> = (0..10).map(|i| (i, Some(((i * 7) % 10) as f64))).collect();
    let labels = stratify(&base);
    let count = |t: Tercile| labels.iter().filter(|(_, l)| *l == t).count();
    assert_eq!((count(Tercile::Easy), count(Tercile::Medium), count(Tercile::Difficult)), (3, 4, 3));
    // Times 0, 1, 2 are easy; 7, 8, 9 difficult.
    for (i, l) in labels {
        let t = (i * 7) % 10;
        let want = if t < 3 {
            Tercile::Easy
        } else if t >= 7 {
            Tercile::Difficult
        } else {
            Tercile::Medium
        };
        assert_eq!(l, want, "env {i}");
    }
}

/// Four environments with hand-computed summaries.
#[test]
fn report_on_a_hand_computed_fixture() {
    let baseline = vec![
        result(0, Method::Fixed, &all(&[10.0, 11.0, 12.0, 13.0])),
        result(1, Method::Fixed, &all(&[20.0, 21.0, 22.0, 23.0])),
        result(2, Method::Fixed, &all(&[5.0, 5.5, 6.0, 6.5])),
        result(3, Method::Fixed, &[Some(30.0), None, Some(31.0), Some(32.0)]),
    ];
    let learned = vec![
        result(0, Method::Learned, &all(&[7.0, 7.5, 8.0, 8.5])),
        result(1, Method::Learned, &all(&[20.0, 21.0, 22.0, 23.0])),
        result(2, Method::Learned, &all(&[5.0, 6.0, 7.0, 8.0])),
        result(3, Method::Learned, &[None; 4]),
    ];
    let splits: BTreeMap<usize, Split> = [(0, Split::Train), (1, Split::Train), (2, Split::Test), (3, Split::Train)].into();
    let report = build_report(&baseline, &learned, &splits, 0.05).unwrap();

    let a = report.aggregate(None, None).unwrap();
    assert_eq!(a.envs, 3);
    assert!((a.baseline_mean - 12.916666666666666).abs() < 1e-12);
    assert!((a.learned_mean - 11.916666666666666).abs() < 1e-12);
    assert!((a.improvement() - 1.0).abs() < 1e-12);
    assert!((a.improvement_pct() - 7.741935483870968).abs() < 1e-9);

    let row = |i: usize| report.rows.iter().find(|r| r.env_index == i).unwrap();
    assert!((row(0).t.unwrap() + 5.196152422706632).abs() < 1e-9);
    assert!((row(0).p.unwrap() - 0.004977595825383969).abs() < 1e-9);
    assert_eq!(row(0).verdict, Verdict::LearnedBetter);
    assert_eq!(row(1).verdict, Verdict::NoDifference);
    assert_eq!(row(2).verdict, Verdict::NoDifference);
    assert_eq!(row(3).verdict, Verdict::Untested);
    assert!(row(3).excluded && !row(0).excluded);
    assert_eq!((row(3).baseline_failures, row(3).learned_failures), (1, 4));
    assert_eq!(row(2).tercile, Tercile::Easy);
    assert_eq!(row(3).tercile, Tercile::Difficult);
    assert_eq!(report.count(Verdict::LearnedBetter, Some(Split::Train), None), 1);

    let train = report.aggregate(Some(Split::Train), None).unwrap();
    assert_eq!(train.envs, 2);
    assert!((train.baseline_mean - 16.5).abs() < 1e-12);

    let summary = report.summary_csv();
    assert!(summary.contains("note,all,excluded_envs,3\n"));
    assert!(summary.contains("significant,all,learned_better,1\n"));
    assert_eq!(report.scatter_csv().lines().count(), 5);

    // The trial CSV alone rebuilds the same report.
    let mut both = baseline.clone();
    both.extend(learned.clone());
    let back = parse_trials_csv(&trials_csv(&both)).unwrap();
    let (b2, l2): (Vec<_>, Vec<_>) = back.into_iter().partition(|r| r.method == Method::Fixed);
    assert_eq!(build_report(&b2, &l2, &splits, 0.05).unwrap(), report);
}

#[test]
fn report_rejects_mismatched_inputs() {
    let splits: BTreeMap<usize, Split> = [(0, Split::Train), (1, Split::Train)].into();
    let b = vec![result(0, Method::Fixed, &all(&[1.0, 2.0]))];
    let l = vec![result(1, Method::Learned, &all(&[1.0, 2.0]))];
    assert!(build_report(&b, &l, &splits, 0.05).is_err());
    let l = vec![result(0, Method::Learned, &all(&[1.0]))];
    assert!(build_report(&b, &l, &splits, 0.05).is_err());
    assert!(build_report(&b, &b, &splits, 0.05).is_err());
}
