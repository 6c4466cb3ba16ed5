//! Mixability, the aggregating strategy and superloss traces.
//!
//! For `β = e^{-η}` the map `h_β(x, y) = (β^x, β^y)` sends superscores into the
//! unit square; the game is β-mixable when the image of the superscore set is
//! convex. The aggregating strategy mixes a finite expert pool with weights
//! `wᵢ ∝ e^{-η Lossᵢ}`, forms the generalized prediction
//! `g(b) = -(1/η) ln Σᵢ wᵢ e^{-η λ(b, γᵢ)}` and substitutes a real prediction
//! whose loss pair is dominated by `(g(0), g(1))`. Over `N` experts its loss
//! never exceeds the best expert's by more than `ln N / η`.
//!
//! The aggregator over a declared pool stands in for predictive complexity,
//! which is not computable.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::games::{
    is_superscore, superprediction_curve, superscore_excess, Game, Prediction, Superscore,
};
use crate::sources::SourceModel;
use crate::strategies::{pointwise_optimal_strategy, Strategy, DEFAULT_OPT_TOL};
use crate::{Bit, Error, Result};

/// Tolerance on the sine of the turning angle between successive segments of
/// the transformed superprediction curve.
pub const DEFAULT_CONCAVITY_TOL: f64 = 1e-9;
/// Curve resolution used when an aggregator checks its learning rate.
pub const CONSTRUCTION_RESOLUTION: usize = 2001;
const ETA_RANGE: (f64, f64) = (1e-4, 64.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixabilityResult {
    pub beta: f64,
    pub eta: f64,
    pub mixable: bool,
    pub max_concavity_violation: f64,
    pub resolution: usize,
    pub tolerance: f64,
}

/// `h_β(x, y) = (β^x, β^y)` with `β^{+inf} = 0`.
pub fn h_beta(beta: f64, pair: Superscore) -> (f64, f64) {
    let pow = |s: f64| if s == f64::INFINITY { 0.0 } else { beta.powf(s) };
    (pow(pair.s0), pow(pair.s1))
}

/// Convexity test of `h_β(S)` through the concavity of its boundary.
///
/// The boundary is the image of the superprediction curve, closed off by a
/// vertical drop to the x-axis at its first point and a horizontal run to the
/// y-axis at its last. Traversed in order of `γ` it must only turn left; the
/// worst right turn (as the sine of its angle) is reported.
pub fn mixability_test(game: &Game, beta: f64, resolution: usize, tol: f64) -> Result<MixabilityResult> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Config(format!("beta = {beta} must lie in (0, 1)")));
    }
    if resolution < 3 {
        return Err(Error::Config(format!("resolution {resolution} must be at least 3")));
    }
    let curve: Vec<(f64, f64)> =
        superprediction_curve(game, resolution).into_iter().map(|s| h_beta(beta, s)).collect();
    let first = curve[0];
    let last = curve[curve.len() - 1];
    let mut points = Vec::with_capacity(curve.len() + 2);
    for p in std::iter::once((first.0, 0.0)).chain(curve).chain(std::iter::once((0.0, last.1))) {
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    let mut worst: f64 = 0.0;
    for w in points.windows(3) {
        let a = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let b = (w[2].0 - w[1].0, w[2].1 - w[1].1);
        let norm = a.0.hypot(a.1) * b.0.hypot(b.1);
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let sine = (a.0 * b.1 - a.1 * b.0) / norm;
        worst = worst.max(-sine);
    }
    Ok(MixabilityResult {
        beta,
        eta: -beta.ln(),
        mixable: worst <= tol,
        max_concavity_violation: worst,
        resolution,
        tolerance: tol,
    })
}

pub fn mixability_test_eta(game: &Game, eta: f64, resolution: usize, tol: f64) -> Result<MixabilityResult> {
    mixability_test(game, (-eta).exp(), resolution, tol)
}

/// Largest `η ∈ [1e-4, 64]` (to within `tol`) at which the game passes the
/// curvature test, found by bisection; `None` when even `η = 1e-4` fails.
pub fn max_mixability_eta(game: &Game, resolution: usize, tol: f64) -> Result<Option<f64>> {
    let passes = |eta: f64| -> Result<bool> {
        Ok(mixability_test_eta(game, eta, resolution, DEFAULT_CONCAVITY_TOL)?.mixable)
    };
    let (mut lo, mut hi) = ETA_RANGE;
    if !passes(lo)? {
        return Ok(None);
    }
    if passes(hi)? {
        return Ok(Some(hi));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Everything the aggregator computed for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStep {
    pub prediction: Prediction,
    /// Generalized prediction `(g(0), g(1))`.
    pub generalized: Superscore,
    /// `max_b (λ(b, γ) - g(b))`; non-positive up to rounding when mixable.
    pub residual: f64,
}

/// Expert pool, learning rate and normalized log-domain weights.
#[derive(Debug, Clone)]
pub struct AggregatorState {
    game: Game,
    experts: Arc<[Strategy]>,
    log_weights: Vec<f64>,
    expert_losses: Vec<f64>,
    eta: f64,
    step: usize,
}

impl AggregatorState {
    /// Uniform prior over `experts`. Refuses learning rates at which the game
    /// fails the mixability test.
    pub fn new(game: Game, experts: Vec<Strategy>, eta: f64) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::Config("expert pool is empty".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("eta = {eta} must be positive and finite")));
        }
        if !mixability_test_eta(&game, eta, CONSTRUCTION_RESOLUTION, DEFAULT_CONCAVITY_TOL)?.mixable {
            return Err(Error::NotMixable(eta));
        }
        let n = experts.len();
        Ok(AggregatorState {
            game,
            experts: experts.into(),
            log_weights: vec![-(n as f64).ln(); n],
            expert_losses: vec![0.0; n],
            eta,
            step: 0,
        })
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn experts(&self) -> &[Strategy] {
        &self.experts
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Cumulative loss of each expert over the outcomes processed so far.
    pub fn expert_losses(&self) -> &[f64] {
        &self.expert_losses
    }

    pub fn best_expert_loss(&self) -> f64 {
        self.expert_losses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The generalized prediction for the given expert predictions.
    pub fn generalized_prediction(&self, expert_predictions: &[Prediction]) -> Superscore {
        let loss = self.game.loss();
        let g = |b: Bit| {
            let terms = self
                .log_weights
                .iter()
                .zip(expert_predictions)
                .map(move |(lw, p)| lw - self.eta * loss.value(b, p.value()));
            -log_sum_exp(terms) / self.eta
        };
        Superscore::new(g(0), g(1))
    }

    /// Generalized prediction followed by the substitution step.
    pub fn predict_from(&self, expert_predictions: &[Prediction]) -> AggregateStep {
        let generalized = self.generalized_prediction(expert_predictions);
        let loss = self.game.loss();
        let residual_at = |g: f64| {
            let excess = |b: Bit, s: f64| if s == f64::INFINITY { f64::NEG_INFINITY } else { loss.value(b, g) - s };
            excess(0, generalized.s0).max(excess(1, generalized.s1))
        };
        let unanimous = expert_predictions.windows(2).all(|w| w[0] == w[1]);
        let (gamma, residual) = if unanimous {
            let g = expert_predictions[0].value();
            (g, residual_at(g))
        } else {
            superscore_excess(loss, generalized)
        };
        AggregateStep { prediction: Prediction::clamped(gamma), generalized, residual }
    }

    /// Multiplies each weight by `e^{-η λ(outcome, γᵢ)}` and renormalizes.
    pub fn update_from(&mut self, expert_predictions: &[Prediction], outcome: Bit) -> Result<()> {
        let loss = self.game.loss();
        let losses: Vec<f64> = expert_predictions.iter().map(|p| loss.value(outcome, p.value())).collect();
        let updated: Vec<f64> = self.log_weights.iter().zip(&losses).map(|(lw, l)| lw - self.eta * l).collect();
        let norm = log_sum_exp(updated.iter().copied());
        if norm == f64::NEG_INFINITY {
            return Err(Error::DegeneratePool(outcome));
        }
        self.log_weights = updated.into_iter().map(|lw| lw - norm).collect();
        for (total, l) in self.expert_losses.iter_mut().zip(losses) {
            *total += l;
        }
        self.step += 1;
        Ok(())
    }

    fn expert_predictions(&self, history: &[Bit]) -> Result<Vec<Prediction>> {
        self.experts.iter().map(|e| e.predict(history)).collect()
    }

    /// Plays the aggregator along `path`, calling `on_step` after each outcome.
    pub fn play(&mut self, path: &[Bit], mut on_step: impl FnMut(&StepRecord)) -> Result<()> {
        let experts = Arc::clone(&self.experts);
        let mut runs = experts.iter().map(Strategy::start).collect::<Result<Vec<_>>>()?;
        let mut cumulative = 0.0;
        let mut predictions = Vec::with_capacity(runs.len());
        for (i, &bit) in path.iter().enumerate() {
            predictions.clear();
            for run in &runs {
                predictions.push(run.predict()?);
            }
            let step = self.predict_from(&predictions);
            let gamma = step.prediction.value();
            let losses = [self.game.loss().value(0, gamma), self.game.loss().value(1, gamma)];
            self.update_from(&predictions, bit)?;
            cumulative += losses[bit as usize];
            for run in &mut runs {
                run.observe(bit);
            }
            on_step(&StepRecord {
                n: i + 1,
                outcome: bit,
                step,
                losses,
                cumulative,
                best_expert: self.best_expert_loss(),
            });
        }
        Ok(())
    }
}

/// One step of [`AggregatorState::play`]. `n` counts outcomes processed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub outcome: Bit,
    pub step: AggregateStep,
    /// `(λ(0, γ), λ(1, γ))` for the aggregator's prediction.
    pub losses: [f64; 2],
    pub cumulative: f64,
    pub best_expert: f64,
}

/// The aggregator's prediction after `history`.
///
/// Expert predictions are recomputed from `history`; the weights are those
/// currently held by `state`.
pub fn aggregate_predict(state: &AggregatorState, history: &[Bit]) -> Result<Prediction> {
    Ok(state.predict_from(&state.expert_predictions(history)?).prediction)
}

/// Processes `outcome` after `history`.
pub fn aggregate_update(state: &mut AggregatorState, history: &[Bit], outcome: Bit) -> Result<()> {
    let predictions = state.expert_predictions(history)?;
    state.update_from(&predictions, outcome)
}

/// Expert descriptor inside a pool file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpertDescriptor {
    Constant { gamma: f64 },
    /// Pointwise optimal predictor of an order-`k` Markov source.
    MarkovOpt { k: usize, p1_given: BTreeMap<String, f64> },
}

/// `{"experts": [...], "eta": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolDescriptor {
    pub experts: Vec<ExpertDescriptor>,
    pub eta: f64,
}

impl ExpertDescriptor {
    pub fn markov(source: &SourceModel) -> Result<Self> {
        match source.descriptor() {
            crate::sources::SourceDescriptor::Markov { k, p1_given } => Ok(ExpertDescriptor::MarkovOpt { k, p1_given }),
            crate::sources::SourceDescriptor::Bernoulli { p1 } => {
                Ok(ExpertDescriptor::MarkovOpt { k: 0, p1_given: BTreeMap::from([(String::new(), p1)]) })
            }
            _ => Err(Error::Config("only Markov sources describe pool experts".into())),
        }
    }

    pub fn build(&self, game: &Game) -> Result<Strategy> {
        match self {
            ExpertDescriptor::Constant { gamma } => Ok(Strategy::constant(Prediction::new(*gamma)?)),
            ExpertDescriptor::MarkovOpt { k, p1_given } => {
                let source = SourceModel::from_descriptor(&crate::sources::SourceDescriptor::Markov {
                    k: *k,
                    p1_given: p1_given.clone(),
                })?;
                let label = format!("markov_opt(k={k},{:?})", p1_given.values().collect::<Vec<_>>());
                Ok(pointwise_optimal_strategy(game, &source, DEFAULT_OPT_TOL)?.with_label(label))
            }
        }
    }
}

impl PoolDescriptor {
    /// Constant experts on the 11-point grid `0, 0.1, …, 1` plus, for each
    /// order `1..=k_max`, one Markov optimal expert per assignment of `grid`
    /// values to the `2^j` contexts.
    pub fn default_pool(k_max: usize, grid: &[f64], eta: f64) -> Self {
        let mut experts: Vec<ExpertDescriptor> =
            (0..=10).map(|i| ExpertDescriptor::Constant { gamma: i as f64 / 10.0 }).collect();
        for j in 1..=k_max {
            let contexts = 1usize << j;
            let combos = grid.len().pow(contexts as u32);
            for code in 0..combos {
                let mut rest = code;
                let p1_given = (0..contexts)
                    .map(|c| {
                        let p = grid[rest % grid.len()];
                        rest /= grid.len();
                        (crate::sources::context_string(c, j), p)
                    })
                    .collect();
                experts.push(ExpertDescriptor::MarkovOpt { k: j, p1_given });
            }
        }
        PoolDescriptor { experts, eta }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn build(&self, game: &Game) -> Result<AggregatorState> {
        let experts = self.experts.iter().map(|e| e.build(game)).collect::<Result<Vec<_>>>()?;
        AggregatorState::new(game.clone(), experts, self.eta)
    }
}

/// Values of a candidate superloss process on visited strings.
#[derive(Debug, Clone, PartialEq)]
pub enum SuperlossTrace {
    /// Along one path: `values[i]` is the value at the path's `i`-bit prefix
    /// and `children[i]` the values at its two one-bit extensions.
    Path { bits: Vec<Bit>, root: f64, children: Vec<[f64; 2]> },
    /// Arbitrary visited strings, keyed by their `'0'`/`'1'` rendering.
    Tree(BTreeMap<String, f64>),
}

impl SuperlossTrace {
    /// Cumulative-loss trace from per-step loss pairs `(λ(0,γᵢ), λ(1,γᵢ))`.
    pub fn from_loss_pairs(bits: &[Bit], pairs: &[[f64; 2]]) -> Self {
        let mut value = 0.0;
        let mut children = Vec::with_capacity(pairs.len());
        for (&b, pair) in bits.iter().zip(pairs) {
            children.push([value + pair[0], value + pair[1]]);
            value += pair[b as usize];
        }
        SuperlossTrace::Path { bits: bits[..children.len()].to_vec(), root: 0.0, children }
    }

    /// `(node length, node value, child values)` for every checked node.
    fn nodes(&self) -> Result<Vec<(usize, f64, [f64; 2])>> {
        match self {
            SuperlossTrace::Path { bits, root, children } => {
                let mut value = *root;
                let mut out = Vec::with_capacity(children.len());
                for (i, (pair, &b)) in children.iter().zip(bits).enumerate() {
                    out.push((i, value, *pair));
                    value = pair[b as usize];
                }
                Ok(out)
            }
            SuperlossTrace::Tree(map) => {
                let mut out = Vec::new();
                for (key, &value) in map {
                    let c0 = map.get(&format!("{key}0"));
                    let c1 = map.get(&format!("{key}1"));
                    match (c0, c1) {
                        (Some(&a), Some(&b)) => out.push((key.len(), value, [a, b])),
                        (None, None) => {}
                        _ => {
                            return Err(Error::IncompleteTrace(format!("node {key:?} has only one child value")))
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn root(&self) -> Option<f64> {
        match self {
            SuperlossTrace::Path { root, .. } => Some(*root),
            SuperlossTrace::Tree(map) => map.get("").copied(),
        }
    }

    /// Value at the end of a path trace.
    pub fn last_value(&self) -> Option<f64> {
        match self {
            SuperlossTrace::Path { bits, root, children } => {
                Some(children.last().map_or(*root, |c| c[bits[children.len() - 1] as usize]))
            }
            SuperlossTrace::Tree(_) => None,
        }
    }

    /// CSV with columns `n, increment0, increment1, cumulative` (path traces).
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "n,increment0,increment1,cumulative")?;
        let SuperlossTrace::Path { bits, .. } = self else {
            return Err(Error::Config("only path traces export to CSV".into()));
        };
        for (i, value, pair) in self.nodes()? {
            let next = pair[bits[i] as usize];
            writeln!(out, "{},{},{},{}", i + 1, pair[0] - value, pair[1] - value, next)?;
        }
        Ok(())
    }
}

/// Conditions 1 and 2 of a superloss process: zero at the empty string, and
/// every pair of one-step increments is a superscore (within `tol`).
pub fn verify_superloss_trace(game: &Game, trace: &SuperlossTrace, tol: f64) -> Result<bool> {
    let Some(root) = trace.root() else {
        return Err(Error::IncompleteTrace("no value at the empty string".into()));
    };
    if root.abs() > tol {
        return Ok(false);
    }
    for (_, value, [c0, c1]) in trace.nodes()? {
        if !is_superscore(game, Superscore::new(c0 - value, c1 - value), tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `|K(xb) - K(x)| ≤ c ln n` with `n = |x| + 1`, for every checked node with `n ≥ 2`.
pub fn increment_bound_check(trace: &SuperlossTrace, c: f64) -> Result<bool> {
    for (len, value, children) in trace.nodes()? {
        let n = len + 1;
        if n < 2 {
            continue;
        }
        let bound = c * (n as f64).ln();
        // NaN and infinite increments fail too
        if !children.iter().all(|child| (child - value).abs() <= bound) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest `|ΔK| / ln n` over checked nodes with `n ≥ 2`: the smallest `c`
/// passing [`increment_bound_check`].
pub fn increment_ratio(trace: &SuperlossTrace) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (len, value, children) in trace.nodes()? {
        let n = len + 1;
        if n < 2 {
            continue;
        }
        for child in children {
            worst = worst.max((child - value).abs() / (n as f64).ln());
        }
    }
    Ok(worst)
}

/// Aggregator cumulative-loss trace along `path`, together with the trace of
/// the mixture loss `-(1/η) ln Σᵢ w⁰ᵢ e^{-η Lossᵢ}`.
pub fn aggregator_traces(state: &mut AggregatorState, path: &[Bit]) -> Result<(SuperlossTrace, SuperlossTrace)> {
    let mut loss_pairs = Vec::with_capacity(path.len());
    let mut mixture_pairs = Vec::with_capacity(path.len());
    state.play(path, |rec| {
        loss_pairs.push(rec.losses);
        mixture_pairs.push([rec.step.generalized.s0, rec.step.generalized.s1]);
    })?;
    Ok((
        SuperlossTrace::from_loss_pairs(path, &loss_pairs),
        SuperlossTrace::from_loss_pairs(path, &mixture_pairs),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_bits;
    use std::f64::consts::LN_2;

    fn constant(g: f64) -> Strategy {
        Strategy::constant(Prediction::new(g).unwrap())
    }

    fn bits(s: &str) -> Vec<Bit> {
        parse_bits(s).unwrap()
    }

    #[test]
    fn mixability_examples() {
        assert!(mixability_test_eta(&Game::log_loss(), 1.0, 10_000, DEFAULT_CONCAVITY_TOL).unwrap().mixable);
        assert!(mixability_test_eta(&Game::square_loss(), 2.0, 10_000, DEFAULT_CONCAVITY_TOL).unwrap().mixable);
        for i in 1..=50 {
            let eta = i as f64 * 0.1;
            let r = mixability_test_eta(&Game::absolute_loss(), eta, 10_000, DEFAULT_CONCAVITY_TOL).unwrap();
            assert!(!r.mixable, "absolute loss passed at eta = {eta}");
        }
    }

    #[test]
    fn mixability_preconditions() {
        assert!(mixability_test(&Game::log_loss(), 1.0, 100, 1e-9).is_err());
        assert!(mixability_test(&Game::log_loss(), 0.5, 2, 1e-9).is_err());
    }

    #[test]
    fn max_eta_examples() {
        let log = max_mixability_eta(&Game::log_loss(), 10_000, 1e-3).unwrap().unwrap();
        assert!((log - 1.0).abs() < 0.01, "log-loss eta* = {log}");
        let sq = max_mixability_eta(&Game::square_loss(), 10_000, 1e-3).unwrap().unwrap();
        assert!((sq - 2.0).abs() < 0.02, "square-loss eta* = {sq}");
        assert_eq!(max_mixability_eta(&Game::absolute_loss(), 10_000, 1e-3).unwrap(), None);
    }

    #[test]
    fn non_mixable_eta_is_refused() {
        let err = AggregatorState::new(Game::log_loss(), vec![constant(0.5)], 1.5).unwrap_err();
        assert!(matches!(err, Error::NotMixable(_)));
        assert!(err.is_precondition());
        assert!(AggregatorState::new(Game::absolute_loss(), vec![constant(0.5)], 0.5).is_err());
    }

    #[test]
    fn single_expert_pool_returns_expert_prediction() {
        let state = AggregatorState::new(Game::square_loss(), vec![constant(0.37)], 2.0).unwrap();
        assert_eq!(aggregate_predict(&state, &bits("0101")).unwrap().value(), 0.37);
    }

    #[test]
    fn log_loss_mixture_is_weighted_mean() {
        let state = AggregatorState::new(Game::log_loss(), vec![constant(0.2), constant(0.6)], 1.0).unwrap();
        let step = state.predict_from(&[Prediction::new(0.2).unwrap(), Prediction::new(0.6).unwrap()]);
        assert!((step.prediction.value() - 0.4).abs() < 1e-9);
        assert!((step.generalized.s1 - (-(0.4f64).ln())).abs() < 1e-12);
        assert!(step.residual <= 1e-12);
    }

    #[test]
    fn update_multipliers() {
        let mut state = AggregatorState::new(Game::log_loss(), vec![constant(0.5), constant(1.0)], 1.0).unwrap();
        aggregate_update(&mut state, &[], 1).unwrap();
        // multipliers 1/2 and 1 from equal weights: normalized (1/3, 2/3)
        let w = state.weights();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((state.expert_losses()[0] - LN_2).abs() < 1e-15);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn identical_experts_keep_equal_weights() {
        let mut state = AggregatorState::new(Game::square_loss(), vec![constant(0.3), constant(0.3)], 2.0).unwrap();
        let path = bits("0110111010");
        for (i, &b) in path.iter().enumerate() {
            aggregate_update(&mut state, &path[..i], b).unwrap();
            let w = state.weights();
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn degenerate_pool_is_an_error() {
        let mut state = AggregatorState::new(Game::log_loss(), vec![constant(0.0), constant(0.0)], 1.0).unwrap();
        assert!(matches!(aggregate_update(&mut state, &[], 1), Err(Error::DegeneratePool(1))));
    }

    #[test]
    fn single_strategy_trace_is_superloss() {
        let game = Game::log_loss();
        let path = bits("0110100");
        let pairs: Vec<[f64; 2]> = (0..path.len()).map(|_| [-(0.7f64).ln(), -(0.3f64).ln()]).collect();
        let trace = SuperlossTrace::from_loss_pairs(&path, &pairs);
        assert!(verify_superloss_trace(&game, &trace, 1e-9).unwrap());
    }

    #[test]
    fn nonzero_root_fails() {
        let mut map = BTreeMap::new();
        map.insert(String::new(), 1.0);
        map.insert("0".into(), 2.0);
        map.insert("1".into(), 2.0);
        assert!(!verify_superloss_trace(&Game::square_loss(), &SuperlossTrace::Tree(map), 1e-9).unwrap());
    }

    #[test]
    fn tree_trace_checks_and_incomplete_error() {
        let mut map = BTreeMap::new();
        map.insert(String::new(), 0.0);
        map.insert("0".into(), LN_2);
        map.insert("1".into(), LN_2);
        assert!(verify_superloss_trace(&Game::log_loss(), &SuperlossTrace::Tree(map.clone()), 1e-9).unwrap());
        // increments (0.1, 0.1) are below the log-loss curve
        map.insert("00".into(), LN_2 + 0.1);
        map.insert("01".into(), LN_2 + 0.1);
        assert!(!verify_superloss_trace(&Game::log_loss(), &SuperlossTrace::Tree(map.clone()), 1e-9).unwrap());
        map.remove("01");
        assert!(matches!(
            verify_superloss_trace(&Game::log_loss(), &SuperlossTrace::Tree(map), 1e-9),
            Err(Error::IncompleteTrace(_))
        ));
    }

    #[test]
    fn aggregator_traces_are_superloss() {
        let game = Game::square_loss();
        let experts = vec![constant(0.1), constant(0.5), constant(0.9)];
        let mut state = AggregatorState::new(game.clone(), experts, 2.0).unwrap();
        let path = bits("01101110100101111011");
        let (loss_trace, mixture_trace) = aggregator_traces(&mut state, &path).unwrap();
        assert!(verify_superloss_trace(&game, &loss_trace, 1e-9).unwrap());
        assert!(verify_superloss_trace(&game, &mixture_trace, 1e-9).unwrap());
        assert!(increment_bound_check(&loss_trace, 2.0).unwrap());
    }

    #[test]
    fn infinite_increment_fails_every_bound() {
        let trace = SuperlossTrace::from_loss_pairs(&bits("01"), &[[0.0, 1.0], [f64::INFINITY, 0.0]]);
        assert!(!increment_bound_check(&trace, 1e12).unwrap());
    }

    #[test]
    fn pool_descriptor_json() {
        let json = r#"{"experts":[{"kind":"markov_opt","k":1,"p1_given":{"0":0.3,"1":0.7}},{"kind":"constant","gamma":0.5}],"eta":1.0}"#;
        let pool = PoolDescriptor::from_json(json).unwrap();
        let state = pool.build(&Game::log_loss()).unwrap();
        assert_eq!(state.experts().len(), 2);
        assert!((state.experts()[0].predict(&bits("1")).unwrap().value() - 0.7).abs() < 1e-8);
        assert!(PoolDescriptor::from_json(r#"{"experts":[],"eta":1.0,"extra":1}"#).is_err());
    }

    #[test]
    fn default_pool_sizes() {
        assert_eq!(PoolDescriptor::default_pool(0, &[0.3, 0.7], 1.0).experts.len(), 11);
        assert_eq!(PoolDescriptor::default_pool(2, &[0.3, 0.7], 1.0).experts.len(), 11 + 4 + 16);
    }

    #[test]
    fn csv_export_of_path_trace() {
        let trace = SuperlossTrace::from_loss_pairs(&bits("10"), &[[0.25, 0.25], [0.5, 0.0]]);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,increment0,increment1,cumulative\n1,0.25,0.25,0.25\n2,0.5,0,0.75\n");
    }
}
