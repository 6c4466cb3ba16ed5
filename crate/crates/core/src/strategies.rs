//! Prediction strategies and loss accounting.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::games::{
    expected_loss_raw, Game, LossFunction, LossKind, LossValue, Prediction, FALLBACK_GRID, GOLDEN_MAX_ITER,
};
use crate::optimize::{golden_section, grid_then_refine};
use crate::sources::{FilterState, SourceKind, SourceModel};
use crate::{format_bits, Bit, Error, Result};

pub const DEFAULT_OPT_TOL: f64 = 1e-10;

/// The prediction minimizing `(1-p1)·λ(0,γ) + p1·λ(1,γ)`.
///
/// Convex losses use golden-section search on the open interval and then
/// compare against the two endpoints; other losses scan a grid first. Ties go
/// to the smaller prediction.
pub fn optimal_prediction(loss: &LossFunction, p1: f64, opt_tol: f64) -> Result<Prediction> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::InvalidProbability(p1));
    }
    optimal_point(loss, p1, opt_tol).map(|(g, _)| Prediction::clamped(g))
}

/// Minimizer and minimum of the expected one-step loss.
pub(crate) fn optimal_point(loss: &LossFunction, p1: f64, opt_tol: f64) -> Result<(f64, f64)> {
    let f = |g: f64| expected_loss_raw(loss, p1, g);
    // Built-in losses have closed-form minimizers; a bracketing search only
    // locates them to about the square root of machine precision.
    let exact = match loss.kind() {
        LossKind::LogLoss | LossKind::SquareLoss if loss.is_builtin() => Some(p1),
        LossKind::AbsoluteLoss if loss.is_builtin() => Some(if p1 > 0.5 { 1.0 } else { 0.0 }),
        _ => None,
    };
    if let Some(g) = exact {
        return Ok((g, f(g)));
    }
    let interior = if loss.convex_in_gamma() {
        golden_section(f, 0.0, 1.0, opt_tol, GOLDEN_MAX_ITER)
    } else {
        grid_then_refine(f, FALLBACK_GRID, opt_tol, GOLDEN_MAX_ITER)
    };
    let candidates = [(0.0, f(0.0)), interior, (1.0, f(1.0))];
    let mut best = (f64::NAN, f64::INFINITY);
    for (g, v) in candidates {
        if v < best.1 || (v == best.1 && g < best.0) {
            best = (g, v);
        }
    }
    if best.1.is_finite() {
        Ok(best)
    } else {
        Err(Error::NoMinimizer)
    }
}

/// Memo of `p1 ↦ s(p1)` on a quantized grid of conditional probabilities.
///
/// A lookup returns the fresh minimizer at the quantized `p1`, so repeated
/// lookups agree exactly with recomputation at that point.
pub struct OptimalStrategyCache {
    loss: LossFunction,
    step: f64,
    opt_tol: f64,
    table: RwLock<HashMap<u64, f64>>,
}

impl fmt::Debug for OptimalStrategyCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OptimalStrategyCache").field("step", &self.step).field("opt_tol", &self.opt_tol).finish()
    }
}

impl OptimalStrategyCache {
    pub const DEFAULT_STEP: f64 = 1e-6;

    pub fn new(loss: LossFunction, step: f64, opt_tol: f64) -> Self {
        OptimalStrategyCache { loss, step, opt_tol, table: RwLock::new(HashMap::new()) }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn quantize(&self, p1: f64) -> f64 {
        ((p1 / self.step).round() * self.step).clamp(0.0, 1.0)
    }

    pub fn lookup(&self, p1: f64) -> Result<Prediction> {
        let key = (p1 / self.step).round() as u64;
        if let Some(&g) = self.table.read().expect("cache lock").get(&key) {
            return Ok(Prediction::clamped(g));
        }
        let gamma = optimal_prediction(&self.loss, self.quantize(p1), self.opt_tol)?;
        self.table.write().expect("cache lock").insert(key, gamma.value());
        Ok(gamma)
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

type Predictor = Arc<dyn Fn(&[Bit]) -> Prediction + Send + Sync>;

#[derive(Clone)]
enum StrategyKind {
    Constant(Prediction),
    /// `s(P(1 | history))` for a source; `table` holds per-context predictions
    /// for finite-memory sources.
    SourceOptimal {
        source: Arc<SourceModel>,
        loss: LossFunction,
        opt_tol: f64,
        table: Option<Arc<[f64]>>,
        cache: Option<Arc<OptimalStrategyCache>>,
    },
    Function(Predictor),
}

/// A deterministic map from finite histories to predictions.
#[derive(Clone)]
pub struct Strategy {
    label: String,
    kind: StrategyKind,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Strategy").field("label", &self.label).finish()
    }
}

impl Strategy {
    pub fn constant(gamma: Prediction) -> Self {
        Strategy { label: format!("constant({})", gamma.value()), kind: StrategyKind::Constant(gamma) }
    }

    pub fn from_fn(label: impl Into<String>, f: impl Fn(&[Bit]) -> Prediction + Send + Sync + 'static) -> Self {
        Strategy { label: label.into(), kind: StrategyKind::Function(Arc::new(f)) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn predict(&self, history: &[Bit]) -> Result<Prediction> {
        match &self.kind {
            StrategyKind::Constant(g) => Ok(*g),
            StrategyKind::Function(f) => Ok(f(history)),
            StrategyKind::SourceOptimal { source, .. } => {
                let mut state = source.filter()?;
                for &b in history {
                    if source.filter_push(&mut state, b) == 0.0 {
                        return Err(Error::ZeroProbabilityHistory(format_bits(history)));
                    }
                }
                self.source_prediction(&state)
            }
        }
    }

    fn source_prediction(&self, state: &FilterState) -> Result<Prediction> {
        let StrategyKind::SourceOptimal { source, loss, opt_tol, table, cache } = &self.kind else {
            unreachable!("only called for source-optimal strategies")
        };
        if let (Some(table), FilterState::Context { len, ctx }) = (table, state) {
            if *len >= source.markov_order().unwrap_or(usize::MAX) {
                return Ok(Prediction::clamped(table[*ctx]));
            }
        }
        if let (Some(table), FilterState::Memoryless) = (table, state) {
            return Ok(Prediction::clamped(table[0]));
        }
        let p1 = source.filter_p1(state);
        match cache {
            Some(cache) => cache.lookup(p1),
            None => optimal_prediction(loss, p1, *opt_tol),
        }
    }

    /// Starts an online run at the empty history.
    pub fn start(&self) -> Result<OnlineStrategy<'_>> {
        let state = match &self.kind {
            StrategyKind::Constant(_) => OnlineState::Stateless,
            StrategyKind::Function(_) => OnlineState::History(Vec::new()),
            StrategyKind::SourceOptimal { source, .. } => OnlineState::Filter(source.filter()?),
        };
        Ok(OnlineStrategy { strategy: self, state })
    }
}

enum OnlineState {
    Stateless,
    History(Vec<Bit>),
    Filter(FilterState),
}

/// A strategy being played along a single sequence of outcomes.
pub struct OnlineStrategy<'a> {
    strategy: &'a Strategy,
    state: OnlineState,
}

impl OnlineStrategy<'_> {
    pub fn predict(&self) -> Result<Prediction> {
        match (&self.strategy.kind, &self.state) {
            (StrategyKind::Constant(g), _) => Ok(*g),
            (StrategyKind::Function(f), OnlineState::History(h)) => Ok(f(h)),
            (StrategyKind::SourceOptimal { .. }, OnlineState::Filter(state)) => self.strategy.source_prediction(state),
            _ => unreachable!("online state matches strategy kind"),
        }
    }

    pub fn observe(&mut self, bit: Bit) {
        match (&self.strategy.kind, &mut self.state) {
            (_, OnlineState::Stateless) => {}
            (_, OnlineState::History(h)) => h.push(bit),
            (StrategyKind::SourceOptimal { source, .. }, OnlineState::Filter(state)) => {
                // A zero-probability outcome leaves the filter unspecified; the
                // source-optimal strategy is only meaningful on the source's support.
                source.filter_push(state, bit);
            }
            _ => unreachable!("online state matches strategy kind"),
        }
    }
}

/// The strategy `w ↦ s(P(1 | w))` that attains every `H_n` for `source`.
pub fn pointwise_optimal_strategy(game: &Game, source: &SourceModel, opt_tol: f64) -> Result<Strategy> {
    source.filter()?;
    let loss = game.loss().clone();
    let table = match source.kind() {
        SourceKind::Bernoulli { p1 } => Some(vec![optimal_prediction(&loss, *p1, opt_tol)?.value()]),
        SourceKind::MarkovOrderK { p1_given, .. } => Some(
            p1_given
                .iter()
                .map(|&p| optimal_prediction(&loss, p, opt_tol).map(Prediction::value))
                .collect::<Result<Vec<_>>>()?,
        ),
        SourceKind::HiddenMarkov { .. } => None,
    };
    Ok(Strategy {
        label: format!("optimal[{}]", source.id()),
        kind: StrategyKind::SourceOptimal {
            source: Arc::new(source.clone()),
            loss,
            opt_tol,
            table: table.map(Into::into),
            cache: None,
        },
    })
}

/// Like [`pointwise_optimal_strategy`] but memoizing `s` through `cache`.
pub fn cached_optimal_strategy(
    game: &Game,
    source: &SourceModel,
    cache: Arc<OptimalStrategyCache>,
) -> Result<Strategy> {
    let mut strategy = pointwise_optimal_strategy(game, source, cache.opt_tol)?;
    if let StrategyKind::SourceOptimal { table, cache: slot, .. } = &mut strategy.kind {
        *table = None;
        *slot = Some(cache);
    }
    Ok(strategy)
}

/// Per-step losses of a strategy on a string, with running totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossLedger {
    pub per_step_losses: Vec<LossValue>,
    pub cumulative: Vec<LossValue>,
}

impl LossLedger {
    pub fn new() -> Self {
        LossLedger { per_step_losses: Vec::new(), cumulative: Vec::new() }
    }

    pub fn push(&mut self, loss: LossValue) {
        let total = self.total() + loss;
        self.per_step_losses.push(loss);
        self.cumulative.push(total);
    }

    pub fn total(&self) -> LossValue {
        self.cumulative.last().copied().unwrap_or(LossValue::ZERO)
    }

    pub fn len(&self) -> usize {
        self.per_step_losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step_losses.is_empty()
    }

    /// CSV with columns `step, loss, cumulative, cumulative/n`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "step,loss,cumulative,rate")?;
        for (i, (l, c)) in self.per_step_losses.iter().zip(&self.cumulative).enumerate() {
            let rate = LossValue::new(c.value() / (i + 1) as f64).unwrap_or(LossValue::INFINITY);
            writeln!(out, "{},{},{},{}", i + 1, l, c, rate)?;
        }
        Ok(())
    }
}

impl Default for LossLedger {
    fn default() -> Self {
        Self::new()
    }
}

/// `Loss(w, strategy) = Σᵢ λ(wᵢ, strategy(w₀..wᵢ₋₁))`, step by step.
pub fn cumulative_loss(game: &Game, strategy: &Strategy, w: &[Bit]) -> Result<LossLedger> {
    let mut run = strategy.start()?;
    let mut ledger = LossLedger::new();
    for &b in w {
        let gamma = run.predict()?;
        ledger.push(LossValue::new(game.loss().value(b, gamma.value()))?);
        run.observe(b);
    }
    Ok(ledger)
}

/// `g_k`: the loss on `next` of the optimal prediction after `window`.
pub fn optimal_loss_function_g(
    game: &Game,
    source: &SourceModel,
    k: usize,
    window: &[Bit],
    next: Bit,
    opt_tol: f64,
) -> Result<LossValue> {
    if window.len() != k {
        return Err(Error::Config(format!("window has length {} but k = {k}", window.len())));
    }
    let p1 = source.conditional_next_probability(window)?;
    let gamma = optimal_prediction(game.loss(), p1, opt_tol)?;
    LossValue::new(game.loss().value(next, gamma.value()))
}
