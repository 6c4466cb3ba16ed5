//! Monte Carlo convergence experiments on sampled paths.
//!
//! Paths run in parallel; path `i` draws its bits with seed `seed + i`, and
//! results are assembled in path order, so identical specs give identical
//! results.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    increment_ratio, verify_superloss_trace, ExpertDescriptor, PoolDescriptor, SuperlossTrace,
};
use crate::entropy::{default_tolerance, entropy_rate};
use crate::games::{Game, LossDescriptor, LossFunction};
use crate::sources::{SourceDescriptor, SourceKind, SourceModel};
use crate::strategies::{pointwise_optimal_strategy, Strategy, DEFAULT_OPT_TOL};
use crate::{Error, Result};

pub const DEFAULT_CHECKPOINTS: [usize; 4] = [100, 1_000, 10_000, 100_000];
/// Number of leading steps whose per-step losses are averaged over paths.
pub const EARLY_STEPS: usize = 10;
/// Cap on the history length used to compute the entropy-rate target.
pub const TARGET_N_CAP: usize = 20;
const HMM_TARGET_TOL: f64 = 1e-6;
const TRACE_TOL: f64 = 1e-9;

/// A built-in game name or a custom loss table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameSpec {
    Named(String),
    Custom(LossDescriptor),
}

impl GameSpec {
    pub fn build(&self) -> Result<Game> {
        match self {
            GameSpec::Named(name) => Game::from_name(name),
            GameSpec::Custom(desc) => Ok(Game::new(LossFunction::from_descriptor(desc.clone())?)),
        }
    }
}

/// Strategy played along each path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    /// The pointwise optimal strategy of the source.
    Optimal,
    /// The aggregating strategy over a pool.
    Pool(PoolDescriptor),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub game: GameSpec,
    pub source: SourceDescriptor,
    pub strategy: StrategySpec,
    pub n: usize,
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

impl ExperimentSpec {
    pub fn new(game: &str, source: SourceDescriptor, strategy: StrategySpec, n: usize, paths: usize, seed: u64) -> Self {
        ExperimentSpec {
            game: GameSpec::Named(game.to_string()),
            source,
            strategy,
            n,
            paths,
            seed,
            checkpoints: default_checkpoints(n),
        }
    }

    /// Checkpoints to use: the explicit list, or the default schedule.
    pub fn resolved_checkpoints(&self) -> Result<Vec<usize>> {
        if self.n == 0 {
            return Err(Error::Config("path length must be at least 1".into()));
        }
        if self.paths == 0 {
            return Err(Error::Config("path count must be at least 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Ok(default_checkpoints(self.n));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("checkpoints must be strictly increasing".into()));
        }
        if self.checkpoints[0] == 0 || *self.checkpoints.last().unwrap() > self.n {
            return Err(Error::Config(format!("checkpoints must lie in 1..={}", self.n)));
        }
        Ok(self.checkpoints.clone())
    }
}

/// Default schedule entries up to `n`, with `n` itself appended if missing.
pub fn default_checkpoints(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = DEFAULT_CHECKPOINTS.iter().copied().filter(|&c| c <= n).collect();
    if out.last() != Some(&n) && n > 0 {
        out.push(n);
    }
    out
}

/// Per-path checks made while running the aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathDiagnostics {
    /// The cumulative-loss trace passes the superloss verification.
    pub superloss_valid: bool,
    /// The mixture-loss trace passes the superloss verification.
    pub mixture_valid: bool,
    /// Smallest `c` with `|ΔK| ≤ c ln n` for all `n ≥ 2` along the path.
    pub max_increment_ratio: f64,
    /// Largest substitution residual `max_b (λ(b,γ) - g(b))`.
    pub max_residual: f64,
    /// Aggregator loss stayed within `ln N / η` of the best expert at every step.
    pub bound_held: bool,
}

/// Mean and standard error of a per-step quantity over paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMean {
    /// Length of the history preceding the step.
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub experiment: String,
    pub game: String,
    pub source: String,
    pub unit: String,
    pub n: usize,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    /// `trajectories[path][j]` is the loss rate at `checkpoints[j]`.
    pub trajectories: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub target_h: f64,
    pub final_deviation: f64,
    /// Best-expert loss rates, shaped like `trajectories` (aggregator runs).
    pub best_expert: Option<Vec<Vec<f64>>>,
    pub pool_size: Option<usize>,
    pub eta: Option<f64>,
    pub diagnostics: Vec<PathDiagnostics>,
    /// Per-step loss at steps `1..=EARLY_STEPS`, averaged over paths.
    pub early_steps: Vec<StepMean>,
}

impl ConvergenceResult {
    pub const CSV_SCHEMA: &'static str = "# schema: entrogame/convergence-csv/v1 unit=nats";

    /// Long format: one row per path and checkpoint.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_SCHEMA)?;
        writeln!(out, "path,checkpoint,rate")?;
        for (p, row) in self.trajectories.iter().enumerate() {
            for (c, rate) in self.checkpoints.iter().zip(row) {
                writeln!(out, "{p},{c},{rate}")?;
            }
        }
        Ok(())
    }

    /// Final-checkpoint rates of every path.
    pub fn final_rates(&self) -> Vec<f64> {
        self.trajectories.iter().map(|t| *t.last().expect("at least one checkpoint")).collect()
    }

    /// Number of paths whose final rate lies within `tol` of the target.
    pub fn paths_within(&self, tol: f64) -> usize {
        self.final_rates().iter().filter(|r| (*r - self.target_h).abs() <= tol).count()
    }
}

/// Entropy-rate target for a source; hidden Markov targets are estimates.
pub fn target_entropy(game: &Game, source: &SourceModel) -> Result<f64> {
    let (tol, cap) = match source.kind() {
        SourceKind::HiddenMarkov { .. } => (HMM_TARGET_TOL, TARGET_N_CAP),
        _ => (default_tolerance(source), TARGET_N_CAP.max(source.markov_order().unwrap_or(0))),
    };
    Ok(entropy_rate(game, source, tol, cap)?.rate_estimate)
}

struct PathRun {
    rates: Vec<f64>,
    best: Option<Vec<f64>>,
    early: Vec<f64>,
    diagnostics: Option<PathDiagnostics>,
}

fn rate(total: f64, n: usize) -> f64 {
    // `+ 0.0` turns a negative zero into a positive one
    total / n as f64 + 0.0
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / count;
    let sd = if count > 1.0 { (xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

fn assemble(
    experiment: &str,
    game: &Game,
    source: &SourceModel,
    spec: &ExperimentSpec,
    checkpoints: Vec<usize>,
    runs: Vec<PathRun>,
    pool: Option<(usize, f64)>,
) -> Result<ConvergenceResult> {
    let target_h = target_entropy(game, source)?;
    let stats: Vec<(f64, f64)> =
        (0..checkpoints.len()).map(|j| mean_sd(runs.iter().map(move |r| r.rates[j]))).collect();
    let early_len = runs[0].early.len();
    let early_steps = (0..early_len)
        .map(|k| {
            let (mean, sd) = mean_sd(runs.iter().map(move |r| r.early[k]));
            StepMean { k, mean, std_error: sd / (runs.len() as f64).sqrt() }
        })
        .collect();
    let final_mean = stats.last().expect("at least one checkpoint").0;
    Ok(ConvergenceResult {
        experiment: experiment.into(),
        game: game.name().into(),
        source: source.id(),
        unit: "nats".into(),
        n: spec.n,
        seed: spec.seed,
        checkpoints,
        mean: stats.iter().map(|s| s.0).collect(),
        sd: stats.iter().map(|s| s.1).collect(),
        target_h,
        final_deviation: (final_mean - target_h).abs(),
        best_expert: runs.iter().map(|r| r.best.clone()).collect(),
        pool_size: pool.map(|p| p.0),
        eta: pool.map(|p| p.1),
        diagnostics: runs.iter().filter_map(|r| r.diagnostics).collect(),
        trajectories: runs.into_iter().map(|r| r.rates).collect(),
        early_steps,
    })
}

/// Plays `strategy` along sampled paths and records `Loss / n`.
///
/// With the source's pointwise optimal strategy the rates converge to the
/// generalized entropy rate; any other strategy gives a diagnostic run.
pub fn smb_experiment_with(
    game: &Game,
    source: &SourceModel,
    strategy: &Strategy,
    spec: &ExperimentSpec,
) -> Result<ConvergenceResult> {
    source.stationary_distribution()?;
    let checkpoints = spec.resolved_checkpoints()?;
    let loss = game.loss();
    let runs = (0..spec.paths)
        .into_par_iter()
        .map(|p| {
            let bits = source.sample_bits(spec.n, spec.seed.wrapping_add(p as u64))?;
            let mut run = strategy.start()?;
            let mut total = 0.0;
            let mut rates = Vec::with_capacity(checkpoints.len());
            let mut early = Vec::with_capacity(EARLY_STEPS);
            let mut next = checkpoints.iter().peekable();
            for (i, &b) in bits.iter().enumerate() {
                let l = loss.value(b, run.predict()?.value());
                total += l;
                run.observe(b);
                if i < EARLY_STEPS {
                    early.push(l);
                }
                if next.peek() == Some(&&(i + 1)) {
                    next.next();
                    rates.push(rate(total, i + 1));
                }
            }
            Ok(PathRun { rates, best: None, early, diagnostics: None })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble("smb", game, source, spec, checkpoints, runs, None)
}

/// Shannon-McMillan-Breiman experiment for the pointwise optimal strategy.
pub fn smb_experiment(spec: &ExperimentSpec) -> Result<ConvergenceResult> {
    let game = spec.game.build()?;
    let source = SourceModel::from_descriptor(&spec.source)?;
    let strategy = pointwise_optimal_strategy(&game, &source, DEFAULT_OPT_TOL)?;
    smb_experiment_with(&game, &source, &strategy, spec)
}

fn check_pool_order(pool: &PoolDescriptor, source: &SourceModel) -> Result<()> {
    let Some(k) = source.markov_order() else {
        return Ok(());
    };
    let matches = pool.experts.iter().any(|e| match e {
        ExpertDescriptor::MarkovOpt { k: j, .. } => *j == k,
        ExpertDescriptor::Constant { .. } => k == 0,
    });
    if matches {
        Ok(())
    } else {
        Err(Error::Config(format!("pool has no expert of the source's Markov order {k}")))
    }
}

/// Runs a pool's aggregating strategy along sampled paths.
///
/// Besides the loss rates it records the best expert's rate and verifies the
/// aggregator's cumulative loss as a superloss process on every path.
pub fn predictive_rate_experiment(spec: &ExperimentSpec) -> Result<ConvergenceResult> {
    let StrategySpec::Pool(pool) = &spec.strategy else {
        return Err(Error::Config("predictive-rate experiments need a pool".into()));
    };
    let game = spec.game.build()?;
    let source = SourceModel::from_descriptor(&spec.source)?;
    source.stationary_distribution()?;
    check_pool_order(pool, &source)?;
    let checkpoints = spec.resolved_checkpoints()?;
    let template = pool.build(&game)?;
    let slack = (template.experts().len() as f64).ln() / template.eta();
    let runs = (0..spec.paths)
        .into_par_iter()
        .map(|p| {
            let bits = source.sample_bits(spec.n, spec.seed.wrapping_add(p as u64))?;
            let mut state = template.clone();
            let mut rates = Vec::with_capacity(checkpoints.len());
            let mut best = Vec::with_capacity(checkpoints.len());
            let mut early = Vec::with_capacity(EARLY_STEPS);
            let mut loss_pairs = Vec::with_capacity(bits.len());
            let mut mixture_pairs = Vec::with_capacity(bits.len());
            let mut max_residual = f64::NEG_INFINITY;
            let mut bound_held = true;
            let mut next = checkpoints.iter().peekable();
            state.play(&bits, |rec| {
                loss_pairs.push(rec.losses);
                mixture_pairs.push([rec.step.generalized.s0, rec.step.generalized.s1]);
                max_residual = max_residual.max(rec.step.residual);
                bound_held &= rec.cumulative <= rec.best_expert + slack + TRACE_TOL * rec.n as f64;
                if rec.n <= EARLY_STEPS {
                    early.push(rec.losses[rec.outcome as usize]);
                }
                if next.peek() == Some(&&rec.n) {
                    next.next();
                    rates.push(rate(rec.cumulative, rec.n));
                    best.push(rate(rec.best_expert, rec.n));
                }
            })?;
            let trace = SuperlossTrace::from_loss_pairs(&bits, &loss_pairs);
            let mixture = SuperlossTrace::from_loss_pairs(&bits, &mixture_pairs);
            let diagnostics = PathDiagnostics {
                superloss_valid: verify_superloss_trace(&game, &trace, TRACE_TOL)?,
                mixture_valid: verify_superloss_trace(&game, &mixture, TRACE_TOL)?,
                max_increment_ratio: increment_ratio(&trace)?,
                max_residual,
                bound_held,
            };
            Ok(PathRun { rates, best: Some(best), early, diagnostics: Some(diagnostics) })
        })
        .collect::<Result<Vec<_>>>()?;
    let pool_info = Some((template.experts().len(), template.eta()));
    assemble("aggregate", &game, &source, spec, checkpoints, runs, pool_info)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub checkpoint: usize,
    pub mean_rate: f64,
    /// Mean aggregator rate minus the entropy rate.
    pub minus_h: f64,
    /// Mean over paths of aggregator rate minus best-expert rate.
    pub minus_best: f64,
    /// `ln N / (η n)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSidedReport {
    pub target_h: f64,
    pub pool_size: usize,
    pub eta: f64,
    pub rows: Vec<RateRow>,
}

impl TwoSidedReport {
    pub const CSV_SCHEMA: &'static str = "# schema: entrogame/rate-report-csv/v1 unit=nats";

    pub fn from_result(result: &ConvergenceResult) -> Result<Self> {
        let (Some(best), Some(pool_size), Some(eta)) = (&result.best_expert, result.pool_size, result.eta) else {
            return Err(Error::Config("rate reports need an aggregator run".into()));
        };
        let paths = result.trajectories.len() as f64;
        let rows = result
            .checkpoints
            .iter()
            .enumerate()
            .map(|(j, &checkpoint)| {
                let gap = result.trajectories.iter().zip(best).map(|(a, b)| a[j] - b[j]).sum::<f64>() / paths;
                RateRow {
                    checkpoint,
                    mean_rate: result.mean[j],
                    minus_h: result.mean[j] - result.target_h,
                    minus_best: gap,
                    bound: (pool_size as f64).ln() / (eta * checkpoint as f64),
                }
            })
            .collect();
        Ok(TwoSidedReport { target_h: result.target_h, pool_size, eta, rows })
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_SCHEMA)?;
        writeln!(out, "checkpoint,mean_rate,minus_h,minus_best,bound")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.checkpoint, r.mean_rate, r.minus_h, r.minus_best, r.bound)?;
        }
        Ok(())
    }
}

/// Two-sided comparison of the aggregator's rate with the entropy rate and
/// with its best expert, per checkpoint.
pub fn two_sided_rate_report(spec: &ExperimentSpec) -> Result<TwoSidedReport> {
    TwoSidedReport::from_result(&predictive_rate_experiment(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn markov_q(q: f64) -> SourceDescriptor {
        SourceDescriptor::Markov { k: 1, p1_given: BTreeMap::from([("0".into(), q), ("1".into(), 1.0 - q)]) }
    }

    fn single_expert_pool(q: f64, eta: f64) -> StrategySpec {
        let SourceDescriptor::Markov { k, p1_given } = markov_q(q) else { unreachable!() };
        StrategySpec::Pool(PoolDescriptor { experts: vec![ExpertDescriptor::MarkovOpt { k, p1_given }], eta })
    }

    #[test]
    fn certain_outcomes_have_zero_rate() {
        let spec = ExperimentSpec::new("logloss", SourceDescriptor::Bernoulli { p1: 1.0 }, StrategySpec::Optimal, 500, 3, 7);
        let result = smb_experiment(&spec).unwrap();
        assert!(result.trajectories.iter().flatten().all(|r| *r == 0.0 && r.is_sign_positive()));
        assert_eq!(result.checkpoints, vec![100, 500]);
    }

    #[test]
    fn default_checkpoint_schedule() {
        assert_eq!(default_checkpoints(100_000), vec![100, 1_000, 10_000, 100_000]);
        assert_eq!(default_checkpoints(5_000), vec![100, 1_000, 5_000]);
        assert_eq!(default_checkpoints(50), vec![50]);
    }

    #[test]
    fn bad_checkpoints_are_rejected() {
        let mut spec = ExperimentSpec::new("sqloss", SourceDescriptor::Bernoulli { p1: 0.5 }, StrategySpec::Optimal, 100, 1, 0);
        spec.checkpoints = vec![50, 20];
        assert!(smb_experiment(&spec).is_err());
        spec.checkpoints = vec![50, 200];
        assert!(smb_experiment(&spec).is_err());
        spec.checkpoints = vec![];
        spec.paths = 0;
        assert!(smb_experiment(&spec).is_err());
    }

    #[test]
    fn non_ergodic_source_is_refused() {
        let source = SourceDescriptor::Markov { k: 1, p1_given: BTreeMap::from([("0".into(), 0.0), ("1".into(), 1.0)]) };
        let err = smb_experiment(&ExperimentSpec::new("logloss", source, StrategySpec::Optimal, 100, 2, 0)).unwrap_err();
        assert!(err.is_precondition(), "{err}");
    }

    #[test]
    fn non_mixable_pool_is_refused() {
        let spec = ExperimentSpec::new("absloss", markov_q(0.3), single_expert_pool(0.3, 1.0), 100, 2, 0);
        assert!(matches!(predictive_rate_experiment(&spec), Err(Error::NotMixable(_))));
    }

    #[test]
    fn single_expert_aggregator_matches_smb() {
        let smb = smb_experiment(&ExperimentSpec::new("logloss", markov_q(0.3), StrategySpec::Optimal, 2_000, 4, 11)).unwrap();
        let spec = ExperimentSpec::new("logloss", markov_q(0.3), single_expert_pool(0.3, 1.0), 2_000, 4, 11);
        let agg = predictive_rate_experiment(&spec).unwrap();
        assert_eq!(smb.trajectories, agg.trajectories);
        let report = TwoSidedReport::from_result(&agg).unwrap();
        assert!(report.rows.iter().all(|r| r.minus_best == 0.0));
    }

    #[test]
    fn pool_must_match_markov_order() {
        let pool = StrategySpec::Pool(PoolDescriptor { experts: vec![ExpertDescriptor::Constant { gamma: 0.5 }], eta: 1.0 });
        let spec = ExperimentSpec::new("logloss", markov_q(0.3), pool, 100, 1, 0);
        assert!(matches!(predictive_rate_experiment(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn reproducible_and_csv_shape() {
        let spec = ExperimentSpec::new("sqloss", SourceDescriptor::Bernoulli { p1: 0.3 }, StrategySpec::Optimal, 1_000, 3, 5);
        let a = smb_experiment(&spec).unwrap();
        let b = smb_experiment(&spec).unwrap();
        assert_eq!(a, b);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ConvergenceResult::CSV_SCHEMA);
        assert_eq!(lines[1], "path,checkpoint,rate");
        assert_eq!(lines.len(), 2 + 3 * 2);
        assert!(lines[2].starts_with("0,100,"));
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"game":"logloss","source":{"kind":"bernoulli","p1":0.3},"strategy":{"kind":"optimal"},"n":100,"paths":2,"seed":1}"#;
        let spec: ExperimentSpec = serde_json::from_str(json).unwrap();
        assert!(spec.checkpoints.is_empty());
        assert_eq!(spec.resolved_checkpoints().unwrap(), vec![100]);
        let back = serde_json::to_string(&spec).unwrap();
        let again: ExperimentSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(again.n, 100);
    }
}
