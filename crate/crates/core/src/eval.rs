//! Evaluation protocol: repeated jittered deployments per environment,
//! Welch t-tests against the fixed-parameter baseline and difficulty terciles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envgen::{EnvSpec, Split};
use crate::error::{Error, Result};
use crate::meta_env::{run_deployment, Deployment, MetaEnv, MetaEnvConfig, MetaState, ParamPolicy};
use crate::nav::{ParamBounds, PlannerParams};
use crate::sim::{check_collision, Pose2D};
use crate::td3::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub trials: usize,
    pub alpha: f64,
    /// Half-width of the uniform start-position jitter, meters; 0 disables it.
    pub jitter: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            alpha: 0.05,
            jitter: 0.05,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("eval.trials must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("eval.alpha must lie in (0, 1)".into()));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::Config("eval.jitter must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Fixed,
    Learned,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Fixed => "fixed-params",
            Method::Learned => "learned-policy",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "fixed-params" => Ok(Method::Fixed),
            "learned-policy" => Ok(Method::Learned),
            other => Err(Error::parse("trials", format!("unknown method {other:?}"))),
        }
    }
}

/// Outcome of every trial of one method on one environment. `times` holds
/// successful traversals only; `None` entries in `per_trial` are timeouts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub env_index: usize,
    pub method: Method,
    pub per_trial: Vec<Option<f64>>,
}

impl TrialResult {
    pub fn times(&self) -> Vec<f64> {
        self.per_trial.iter().flatten().copied().collect()
    }

    pub fn failures(&self) -> usize {
        self.per_trial.iter().filter(|t| t.is_none()).count()
    }

    pub fn mean(&self) -> Option<f64> {
        let t = self.times();
        (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64)
    }
}

/// Deterministic actor policy over normalized actions.
pub struct ActorPolicy<'a>(pub &'a Mlp);

impl ParamPolicy for ActorPolicy<'_> {
    fn decide(&mut self, state: &MetaState, bounds: &ParamBounds) -> Result<PlannerParams> {
        Ok(bounds.denormalize(&self.0.predict(state.as_slice())?))
    }
}

/// Start pose of trial `trial`: the nominal start shifted by up to `jitter`
/// in x and y, redrawn until collision-free.
pub fn trial_start(spec: &EnvSpec, cfg: &MetaEnvConfig, jitter: f64, seed: u64, trial: usize) -> Pose2D {
    if jitter == 0.0 {
        return spec.start;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((spec.index as u64) << 32) | trial as u64);
    for _ in 0..100 {
        let p = Pose2D::new(
            spec.start.x + rng.random_range(-jitter..=jitter),
            spec.start.y + rng.random_range(-jitter..=jitter),
            spec.start.heading,
        );
        if !check_collision(&spec.grid, p, &cfg.robot) {
            return p;
        }
    }
    spec.start
}

/// `n` deployments of `policy` on one environment with per-trial jitter.
pub fn run_trials(
    spec: &EnvSpec,
    cfg: &MetaEnvConfig,
    method: Method,
    policy: &mut dyn ParamPolicy,
    n: usize,
    jitter: f64,
    seed: u64,
) -> Result<(TrialResult, Vec<Deployment>)> {
    let mut env = MetaEnv::new(spec, *cfg);
    let mut per_trial = Vec::with_capacity(n);
    let mut runs = Vec::with_capacity(n);
    for k in 0..n {
        let start = trial_start(spec, cfg, jitter, seed, k);
        let d = run_deployment(&mut env, start, policy)?;
        per_trial.push(d.traversal_time);
        runs.push(d);
    }
    Ok((
        TrialResult {
            env_index: spec.index,
            method,
            per_trial,
        },
        runs,
    ))
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    inc_beta(0.5 * df, 0.5, df / (df + t * t))
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t-test: `(t, two-sided p)`. Positive `t` means
/// `a` has the larger mean.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Config(format!("t-test needs at least 2 samples per group, got {} and {}", a.len(), b.len())));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(ma - mb), 0.0)
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok((t, t_two_sided_p(t, df)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tercile {
    Easy,
    Medium,
    Difficult,
}

impl Tercile {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tercile::Easy => "easy",
            Tercile::Medium => "medium",
            Tercile::Difficult => "difficult",
        }
    }
}

/// Label environments by baseline time: the fastest `floor(n/3)` are easy,
/// the slowest `floor(n/3)` difficult, the rest medium. Ties go to the lower
/// index first; missing times sort last.
pub fn stratify(baseline: &[(usize, Option<f64>)]) -> Vec<(usize, Tercile)> {
    let mut order: Vec<(usize, f64)> = baseline.iter().map(|&(i, t)| (i, t.unwrap_or(f64::INFINITY))).collect();
    order.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    let n = order.len();
    let third = n / 3;
    order
        .into_iter()
        .enumerate()
        .map(|(rank, (i, _))| {
            let label = if rank < third {
                Tercile::Easy
            } else if rank >= n - third {
                Tercile::Difficult
            } else {
                Tercile::Medium
            };
            (i, label)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    LearnedBetter,
    BaselineBetter,
    NoDifference,
    /// Too few successful trials for a test.
    Untested,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::LearnedBetter => "learned",
            Verdict::BaselineBetter => "baseline",
            Verdict::NoDifference => "none",
            Verdict::Untested => "untested",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvComparison {
    pub env_index: usize,
    pub split: Split,
    pub tercile: Tercile,
    pub baseline_mean: Option<f64>,
    pub learned_mean: Option<f64>,
    pub baseline_failures: usize,
    pub learned_failures: usize,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub verdict: Verdict,
    /// Excluded from aggregates because one method never reached the goal.
    pub excluded: bool,
}

/// Mean traversal times and the improvement of the learned policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub envs: usize,
    pub baseline_mean: f64,
    pub learned_mean: f64,
}

impl Aggregate {
    pub fn improvement(&self) -> f64 {
        self.baseline_mean - self.learned_mean
    }

    pub fn improvement_pct(&self) -> f64 {
        100.0 * self.improvement() / self.baseline_mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub rows: Vec<EnvComparison>,
}

/// Absolute and percentage improvement of `learned` over `baseline` means.
pub fn improvement(baseline: f64, learned: f64) -> (f64, f64) {
    let d = baseline - learned;
    (d, 100.0 * d / baseline)
}

impl ComparisonReport {
    fn included(&self, split: Option<Split>, tercile: Option<Tercile>) -> impl Iterator<Item = &EnvComparison> {
        self.rows.iter().filter(move |r| {
            !r.excluded && split.is_none_or(|s| r.split == s) && tercile.is_none_or(|t| r.tercile == t)
        })
    }

    pub fn aggregate(&self, split: Option<Split>, tercile: Option<Tercile>) -> Option<Aggregate> {
        let rows: Vec<_> = self.included(split, tercile).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some(Aggregate {
            envs: rows.len(),
            baseline_mean: rows.iter().filter_map(|r| r.baseline_mean).sum::<f64>() / n,
            learned_mean: rows.iter().filter_map(|r| r.learned_mean).sum::<f64>() / n,
        })
    }

    /// Environments where `verdict` holds, optionally restricted.
    pub fn count(&self, verdict: Verdict, split: Option<Split>, tercile: Option<Tercile>) -> usize {
        self.rows
            .iter()
            .filter(|r| r.verdict == verdict && split.is_none_or(|s| r.split == s) && tercile.is_none_or(|t| r.tercile == t))
            .count()
    }

    /// Long-format summary: `table,group,metric,value`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("table,group,metric,value\n");
        let groups: [(&str, Option<Split>); 3] = [("all", None), ("train", Some(Split::Train)), ("test", Some(Split::Test))];
        for (name, split) in groups {
            if let Some(a) = self.aggregate(split, None) {
                let _ = writeln!(out, "mean_time,{name},envs,{}", a.envs);
                let _ = writeln!(out, "mean_time,{name},baseline_s,{}", a.baseline_mean);
                let _ = writeln!(out, "mean_time,{name},learned_s,{}", a.learned_mean);
                let _ = writeln!(out, "mean_time,{name},improvement_s,{}", a.improvement());
                let _ = writeln!(out, "mean_time,{name},improvement_pct,{}", a.improvement_pct());
            }
        }
        for (name, split) in groups {
            let _ = writeln!(out, "significant,{name},learned_better,{}", self.count(Verdict::LearnedBetter, split, None));
            let _ = writeln!(out, "significant,{name},baseline_better,{}", self.count(Verdict::BaselineBetter, split, None));
        }
        for t in [Tercile::Easy, Tercile::Medium, Tercile::Difficult] {
            for (name, split) in groups {
                let group = format!("{}/{name}", t.as_str());
                let envs = self.rows.iter().filter(|r| r.tercile == t && split.is_none_or(|s| r.split == s)).count();
                let _ = writeln!(out, "tercile,{group},envs,{envs}");
                let _ = writeln!(out, "tercile,{group},learned_better,{}", self.count(Verdict::LearnedBetter, split, Some(t)));
                let _ = writeln!(out, "tercile,{group},baseline_better,{}", self.count(Verdict::BaselineBetter, split, Some(t)));
            }
        }
        let excluded: Vec<String> = self.rows.iter().filter(|r| r.excluded).map(|r| r.env_index.to_string()).collect();
        let _ = writeln!(out, "note,all,excluded_envs,{}", excluded.join(" "));
        let _ = writeln!(out, "note,all,alpha,{}", self.alpha);
        out
    }

    /// One row per environment, ordered by baseline time.
    pub fn scatter_csv(&self) -> String {
        let mut rows: Vec<&EnvComparison> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            let ta = a.baseline_mean.unwrap_or(f64::INFINITY);
            let tb = b.baseline_mean.unwrap_or(f64::INFINITY);
            ta.total_cmp(&tb).then(a.env_index.cmp(&b.env_index))
        });
        let mut out = String::from("rank,env_index,split,tercile,baseline_mean_s,learned_mean_s,baseline_failures,learned_failures,t,p,significant\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (rank, r) in rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{rank},{},{},{},{},{},{},{},{},{},{}",
                r.env_index,
                r.split.as_str(),
                r.tercile.as_str(),
                opt(r.baseline_mean),
                opt(r.learned_mean),
                r.baseline_failures,
                r.learned_failures,
                opt(r.t),
                opt(r.p),
                r.verdict.as_str()
            );
        }
        out
    }
}

/// Compare per-environment trials of both methods.
pub fn build_report(baseline: &[TrialResult], learned: &[TrialResult], splits: &BTreeMap<usize, Split>, alpha: f64) -> Result<ComparisonReport> {
    let index = |v: &[TrialResult], m: Method| -> Result<BTreeMap<usize, TrialResult>> {
        let mut out = BTreeMap::new();
        for r in v {
            if r.method != m {
                return Err(Error::Mismatch(format!("expected {} trials, found {}", m.tag(), r.method.tag())));
            }
            if out.insert(r.env_index, r.clone()).is_some() {
                return Err(Error::Mismatch(format!("environment {} listed twice", r.env_index)));
            }
        }
        Ok(out)
    };
    let base = index(baseline, Method::Fixed)?;
    let learn = index(learned, Method::Learned)?;
    if base.keys().ne(learn.keys()) {
        return Err(Error::Mismatch("methods were evaluated on different environments".into()));
    }
    let terciles: BTreeMap<usize, Tercile> = stratify(&base.values().map(|r| (r.env_index, r.mean())).collect::<Vec<_>>()).into_iter().collect();
    let mut rows = Vec::with_capacity(base.len());
    for (&env, b) in &base {
        let l = &learn[&env];
        if b.per_trial.len() != l.per_trial.len() {
            return Err(Error::Mismatch(format!("environment {env} has unequal trial counts")));
        }
        let split = *splits.get(&env).ok_or_else(|| Error::Mismatch(format!("environment {env} has no split")))?;
        let (tb, tl) = (b.times(), l.times());
        let (mut t, mut p, mut verdict) = (None, None, Verdict::Untested);
        if tb.len() >= 2 && tl.len() >= 2 {
            let (tv, pv) = welch_t_test(&tl, &tb)?;
            t = Some(tv);
            p = Some(pv);
            verdict = if pv < alpha && tv < 0.0 {
                Verdict::LearnedBetter
            } else if pv < alpha && tv > 0.0 {
                Verdict::BaselineBetter
            } else {
                Verdict::NoDifference
            };
        }
        rows.push(EnvComparison {
            env_index: env,
            split,
            tercile: terciles[&env],
            baseline_mean: b.mean(),
            learned_mean: l.mean(),
            baseline_failures: b.failures(),
            learned_failures: l.failures(),
            t,
            p,
            verdict,
            excluded: tb.is_empty() || tl.is_empty(),
        });
    }
    Ok(ComparisonReport { alpha, rows })
}

pub const TRIALS_HEADER: &str = "env_index,method,trial,reached,time_s";

/// Per-trial CSV; the sole input needed to rebuild a report.
pub fn trials_csv(results: &[TrialResult]) -> String {
    let mut out = format!("{TRIALS_HEADER}\n");
    for r in results {
        for (k, t) in r.per_trial.iter().enumerate() {
            let (reached, time) = match t {
                Some(v) => (1, v.to_string()),
                None => (0, String::new()),
            };
            let _ = writeln!(out, "{},{},{k},{reached},{time}", r.env_index, r.method.tag());
        }
    }
    out
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialResult>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRIALS_HEADER) {
        return Err(Error::parse("trials", "unexpected header"));
    }
    let mut map: BTreeMap<(Method, usize), Vec<Option<f64>>> = BTreeMap::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::parse("trials", format!("malformed row {}", n + 2));
        if f.len() != 5 {
            return Err(bad());
        }
        let env: usize = f[0].parse().map_err(|_| bad())?;
        let method = Method::from_tag(f[1])?;
        let trial: usize = f[2].parse().map_err(|_| bad())?;
        let time = match f[3] {
            "1" => Some(f[4].parse::<f64>().map_err(|_| bad())?),
            "0" => None,
            _ => return Err(bad()),
        };
        let list = map.entry((method, env)).or_default();
        if trial != list.len() {
            return Err(bad());
        }
        list.push(time);
    }
    Ok(map
        .into_iter()
        .map(|((method, env_index), per_trial)| TrialResult {
            env_index,
            method,
            per_trial,
        })
        .collect())
}

pub const SPLITS_HEADER: &str = "env_index,split";

/// Rebuild `report.csv` and `scatter.csv` from stored trials.
pub fn report_from_trials(trials_text: &str, splits: &BTreeMap<usize, Split>, alpha: f64) -> Result<ComparisonReport> {
    let all = parse_trials_csv(trials_text)?;
    let (base, learned): (Vec<_>, Vec<_>) = all.into_iter().partition(|r| r.method == Method::Fixed);
    build_report(&base, &learned, splits, alpha)
}

/// Write `report.csv` and `scatter.csv` into `dir`.
pub fn write_report(dir: &Path, report: &ComparisonReport) -> Result<()> {
    for (name, text) in [("report.csv", report.summary_csv()), ("scatter.csv", report.scatter_csv())] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(env: usize, method: Method, times: &[f64]) -> TrialResult {
        TrialResult {
            env_index: env,
            method,
            per_trial: times.iter().map(|&t| Some(t)).collect(),
        }
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(welch_t_test(&a, &a).unwrap(), (0.0, 1.0));
        assert_eq!(welch_t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), (0.0, 1.0));
        assert!(welch_t_test(&[1.0], &a).is_err());
    }

    #[test]
    fn separated_means() {
        let a = [10.0, 10.001, 9.999, 10.0005];
        let b = [20.0, 20.001, 19.999, 20.0002];
        let (t, p) = welch_t_test(&a, &b).unwrap();
        assert!(t < 0.0 && p < 1e-6);
    }

    #[test]
    fn symmetric_up_to_sign() {
        let a = [1.0, 2.5, 3.0, 4.2];
        let b = [2.0, 3.1, 4.0, 5.5, 6.0];
        let (t1, p1) = welch_t_test(&a, &b).unwrap();
        let (t2, p2) = welch_t_test(&b, &a).unwrap();
        assert_eq!(t1, -t2);
        assert!((p1 - p2).abs() < 1e-15);
    }

    #[test]
    fn tercile_sizes() {
        for (n, expect) in [(300, (100, 100, 100)), (9, (3, 3, 3)), (10, (3, 4, 3))] {
            let base: Vec<(usize, Option<f64>)> = (0..n).map(|i| (i, Some(((i * 37) % n) as f64))).collect();
            let labels = stratify(&base);
            let count = |t| labels.iter().filter(|(_, l)| *l == t).count();
            assert_eq!((count(Tercile::Easy), count(Tercile::Medium), count(Tercile::Difficult)), expect);
        }
    }

    #[test]
    fn tercile_ties_break_on_index() {
        let base = [(5, Some(1.0)), (2, Some(1.0)), (9, Some(1.0))];
        let labels = stratify(&base);
        assert_eq!(labels, vec![(2, Tercile::Easy), (5, Tercile::Medium), (9, Tercile::Difficult)]);
    }

    #[test]
    fn improvement_arithmetic() {
        let (d, pct) = improvement(13.24, 11.96);
        assert!((d - 1.28).abs() < 1e-12);
        assert!((pct - 9.667_673_716_012_085).abs() < 1e-9);
    }

    #[test]
    fn identical_methods_report_nothing() {
        let times = [10.0, 11.0, 12.0, 10.5];
        let b: Vec<_> = (0..3).map(|e| result(e, Method::Fixed, &times)).collect();
        let l: Vec<_> = (0..3).map(|e| result(e, Method::Learned, &times)).collect();
        let splits = (0..3).map(|e| (e, Split::Train)).collect();
        let r = build_report(&b, &l, &splits, 0.05).unwrap();
        assert_eq!(r.count(Verdict::LearnedBetter, None, None), 0);
        assert_eq!(r.count(Verdict::BaselineBetter, None, None), 0);
        assert_eq!(r.aggregate(None, None).unwrap().improvement(), 0.0);
    }

    #[test]
    fn mismatched_sets_error() {
        let b = vec![result(0, Method::Fixed, &[1.0, 2.0])];
        let l = vec![result(1, Method::Learned, &[1.0, 2.0])];
        let splits = [(0, Split::Train), (1, Split::Train)].into_iter().collect();
        assert!(matches!(build_report(&b, &l, &splits, 0.05), Err(Error::Mismatch(_))));
    }

    #[test]
    fn trials_round_trip_regenerates_report() {
        let b = vec![result(0, Method::Fixed, &[10.0, 10.2, 9.9]), result(1, Method::Fixed, &[20.0, 21.0, 19.5])];
        let mut l1 = result(1, Method::Learned, &[15.0, 15.5, 14.8]);
        l1.per_trial.push(None);
        let mut b1 = b[1].clone();
        b1.per_trial.push(Some(20.5));
        let b = vec![b[0].clone(), b1];
        let l = vec![result(0, Method::Learned, &[10.1, 10.0, 9.8]), l1];
        let splits: BTreeMap<usize, Split> = [(0, Split::Train), (1, Split::Test)].into_iter().collect();
        let all: Vec<TrialResult> = b.iter().chain(&l).cloned().collect();
        let text = trials_csv(&all);
        let direct = build_report(&b, &l, &splits, 0.05).unwrap();
        let again = report_from_trials(&text, &splits, 0.05).unwrap();
        assert_eq!(direct.summary_csv(), again.summary_csv());
        assert_eq!(direct.scatter_csv(), again.scatter_csv());
    }
}
