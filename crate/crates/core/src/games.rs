//! Loss functions, the game triple, regularity checks and superscores.
//!
//! The outcome alphabet is always binary and the prediction space is the
//! closed interval `[0, 1]`. A loss maps `(outcome, prediction)` to an
//! extended non-negative real; `+inf` is a genuine `f64::INFINITY`, never a
//! sentinel.

use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::optimize::{golden_section, grid_then_refine};
use crate::{Bit, Error, Result};

/// Grid used by the non-convex fallback of the one-dimensional searches.
pub(crate) const FALLBACK_GRID: usize = 1001;
pub(crate) const GOLDEN_TOL: f64 = 1e-14;
pub(crate) const GOLDEN_MAX_ITER: usize = 200;

/// An element of the prediction space `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Prediction(f64);

impl Prediction {
    pub fn new(gamma: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&gamma) {
            Ok(Prediction(gamma))
        } else {
            Err(Error::InvalidPrediction(gamma))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to `0`.
    pub fn clamped(gamma: f64) -> Self {
        if gamma.is_nan() {
            Prediction(0.0)
        } else {
            Prediction(gamma.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Prediction {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Prediction::new(v)
    }
}

impl From<Prediction> for f64 {
    fn from(p: Prediction) -> f64 {
        p.0
    }
}

/// A non-negative loss in nats, possibly `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LossValue(f64);

impl LossValue {
    pub const ZERO: LossValue = LossValue(0.0);
    pub const INFINITY: LossValue = LossValue(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            Err(Error::Domain(format!("loss value {value} is negative or NaN")))
        } else {
            Ok(LossValue(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Add for LossValue {
    type Output = LossValue;
    fn add(self, rhs: LossValue) -> LossValue {
        LossValue(self.0 + rhs.0)
    }
}

impl std::iter::Sum for LossValue {
    fn sum<I: Iterator<Item = LossValue>>(iter: I) -> LossValue {
        iter.fold(LossValue::ZERO, Add::add)
    }
}

impl fmt::Display for LossValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for LossValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        extended::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for LossValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = extended::deserialize(d)?;
        LossValue::new(v).map_err(serde::de::Error::custom)
    }
}

/// Serde helpers encoding `+inf` as the string `"inf"` (and `-inf` as `"-inf"`).
pub mod extended {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&Wrap(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let raw: Vec<Wrap> = Vec::deserialize(d)?;
            Ok(raw.into_iter().map(|w| w.0).collect())
        }

        struct Wrap(f64);

        impl serde::Serialize for Wrap {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::serialize(&self.0, s)
            }
        }

        impl<'de> Deserialize<'de> for Wrap {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                super::deserialize(d).map(Wrap)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    LogLoss,
    SquareLoss,
    AbsoluteLoss,
    Custom,
}

/// Piecewise-linear custom loss given on a grid of predictions.
///
/// Between finite grid values the loss is interpolated linearly. On a segment
/// with an infinite end `e^{-λ}` is interpolated instead, so the loss rises
/// continuously to `+inf` at that grid point; a segment with two infinite ends
/// is infinite throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    pub grid: Vec<f64>,
    #[serde(with = "extended::vec")]
    pub loss0: Vec<f64>,
    #[serde(with = "extended::vec")]
    pub loss1: Vec<f64>,
}

impl LossTable {
    pub fn new(grid: Vec<f64>, loss0: Vec<f64>, loss1: Vec<f64>) -> Result<Self> {
        let table = LossTable { grid, loss0, loss1 };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if n < 2 || self.loss0.len() != n || self.loss1.len() != n {
            return Err(Error::Config(
                "loss table needs at least two grid points and equally long loss0/loss1".into(),
            ));
        }
        if self.grid[0] != 0.0 || self.grid[n - 1] != 1.0 {
            return Err(Error::Config("loss table grid must start at 0 and end at 1".into()));
        }
        if !self.grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("loss table grid must be strictly increasing".into()));
        }
        if self.loss0.iter().chain(&self.loss1).any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Domain("loss table contains a negative or NaN entry".into()));
        }
        Ok(())
    }

    fn eval(&self, outcome: Bit, gamma: f64) -> f64 {
        let values = if outcome == 0 { &self.loss0 } else { &self.loss1 };
        let i = self.grid.partition_point(|&g| g <= gamma);
        if i == 0 {
            return values[0];
        }
        if i >= self.grid.len() {
            return values[self.grid.len() - 1];
        }
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        let (v0, v1) = (values[i - 1], values[i]);
        if gamma == g0 {
            return v0;
        }
        let t = (gamma - g0) / (g1 - g0);
        if v0.is_infinite() || v1.is_infinite() {
            let (e0, e1) = ((-v0).exp(), (-v1).exp());
            return -(e0 + t * (e1 - e0)).ln();
        }
        v0 + t * (v1 - v0)
    }
}

/// JSON descriptor of a custom loss: `{"kind":"table","grid":[..],"loss0":[..],"loss1":[..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossDescriptor {
    Table {
        #[serde(flatten)]
        table: LossTable,
        #[serde(default)]
        convex_in_gamma: bool,
    },
}

type ClosureLoss = Arc<dyn Fn(Bit, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Evaluator {
    Builtin,
    Table(Arc<LossTable>),
    Closure(ClosureLoss),
}

/// A loss function `λ: {0,1} × [0,1] → [0, +inf]`.
#[derive(Clone)]
pub struct LossFunction {
    kind: LossKind,
    evaluator: Evaluator,
    convex_in_gamma: bool,
}

impl fmt::Debug for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFunction")
            .field("kind", &self.kind)
            .field("convex_in_gamma", &self.convex_in_gamma)
            .finish()
    }
}

impl LossFunction {
    /// `λ(b, γ) = -ln |1 - b - γ|`: `-ln(1-γ)` for outcome 0, `-ln γ` for outcome 1.
    pub fn log_loss() -> Self {
        Self::builtin(LossKind::LogLoss)
    }

    /// `λ(b, γ) = (b - γ)²`.
    pub fn square_loss() -> Self {
        Self::builtin(LossKind::SquareLoss)
    }

    /// `λ(b, γ) = |b - γ|`.
    pub fn absolute_loss() -> Self {
        Self::builtin(LossKind::AbsoluteLoss)
    }

    fn builtin(kind: LossKind) -> Self {
        LossFunction { kind, evaluator: Evaluator::Builtin, convex_in_gamma: true }
    }

    /// Wraps an arbitrary evaluator. When `convex_in_gamma` is false the
    /// minimizers fall back to a grid scan.
    pub fn custom(f: impl Fn(Bit, f64) -> f64 + Send + Sync + 'static, convex_in_gamma: bool) -> Self {
        LossFunction { kind: LossKind::Custom, evaluator: Evaluator::Closure(Arc::new(f)), convex_in_gamma }
    }

    pub fn from_table(table: LossTable, convex_in_gamma: bool) -> Result<Self> {
        table.validate()?;
        Ok(LossFunction { kind: LossKind::Custom, evaluator: Evaluator::Table(Arc::new(table)), convex_in_gamma })
    }

    pub fn from_descriptor(desc: LossDescriptor) -> Result<Self> {
        match desc {
            LossDescriptor::Table { table, convex_in_gamma } => Self::from_table(table, convex_in_gamma),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_descriptor(serde_json::from_str(json)?)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub(crate) fn is_builtin(&self) -> bool {
        matches!(self.evaluator, Evaluator::Builtin)
    }

    pub fn convex_in_gamma(&self) -> bool {
        self.convex_in_gamma
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::LogLoss => "logloss",
            LossKind::SquareLoss => "sqloss",
            LossKind::AbsoluteLoss => "absloss",
            LossKind::Custom => "custom",
        }
    }

    /// Raw evaluation without domain checks. Hot loops use this.
    #[inline]
    pub fn value(&self, outcome: Bit, gamma: f64) -> f64 {
        match &self.evaluator {
            Evaluator::Builtin => match self.kind {
                LossKind::LogLoss => {
                    if outcome == 0 {
                        -(1.0 - gamma).ln()
                    } else {
                        -gamma.ln()
                    }
                }
                LossKind::SquareLoss => {
                    let d = outcome as f64 - gamma;
                    d * d
                }
                LossKind::AbsoluteLoss => (outcome as f64 - gamma).abs(),
                LossKind::Custom => unreachable!("custom losses carry their own evaluator"),
            },
            Evaluator::Table(t) => t.eval(outcome, gamma),
            Evaluator::Closure(f) => f(outcome, gamma),
        }
    }
}

/// The game `({0,1}, [0,1], λ)`.
#[derive(Debug, Clone)]
pub struct Game {
    loss: LossFunction,
}

impl Game {
    pub const ALPHABET_SIZE: usize = 2;

    pub fn new(loss: LossFunction) -> Self {
        Game { loss }
    }

    pub fn log_loss() -> Self {
        Game::new(LossFunction::log_loss())
    }

    pub fn square_loss() -> Self {
        Game::new(LossFunction::square_loss())
    }

    pub fn absolute_loss() -> Self {
        Game::new(LossFunction::absolute_loss())
    }

    /// Looks up a built-in game by its CLI name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "logloss" | "log" => Ok(Game::log_loss()),
            "sqloss" | "square" | "squareloss" => Ok(Game::square_loss()),
            "absloss" | "absolute" | "absoluteloss" => Ok(Game::absolute_loss()),
            other => Err(Error::Config(format!(
                "unknown game {other:?} (expected logloss, sqloss or absloss)"
            ))),
        }
    }

    pub fn loss(&self) -> &LossFunction {
        &self.loss
    }

    pub fn name(&self) -> &'static str {
        self.loss.name()
    }
}

/// A pair of loss bounds `(s0, s1)` for outcomes 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superscore {
    #[serde(with = "extended")]
    pub s0: f64,
    #[serde(with = "extended")]
    pub s1: f64,
}

impl Superscore {
    pub fn new(s0: f64, s1: f64) -> Self {
        Superscore { s0, s1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegularityReport {
    pub gamma_compact: bool,
    pub loss_continuous: bool,
    pub finite_loss_prediction_exists: bool,
    pub infinite_loss_approachable: bool,
    pub is_regular: bool,
    pub resolution: usize,
}

/// Checked loss evaluation.
pub fn loss_eval(loss: &LossFunction, outcome: Bit, prediction: Prediction) -> Result<LossValue> {
    if outcome > 1 {
        return Err(Error::Domain(format!("outcome {outcome} is not a bit")));
    }
    LossValue::new(loss.value(outcome, prediction.value()))
}

/// Grid-based regularity verdict.
///
/// Continuity is a finite-resolution heuristic: on the region at least 1% of
/// the interval away from infinite-loss grid points, the largest jump between
/// neighbouring grid values must shrink when the grid is doubled.
pub fn check_regularity(game: &Game, grid_resolution: usize) -> RegularityReport {
    let resolution = grid_resolution.max(2);
    let loss = game.loss();
    let step = 1.0 / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|i| i as f64 * step).collect();

    let mut domain_ok = true;
    let mut values = [vec![0.0; resolution], vec![0.0; resolution]];
    for b in 0..2u8 {
        for (i, &g) in grid.iter().enumerate() {
            let v = loss.value(b, g);
            if v.is_nan() || v < 0.0 {
                domain_ok = false;
            }
            values[b as usize][i] = v;
        }
    }

    let finite_loss_prediction_exists =
        (0..resolution).any(|i| values[0][i].is_finite() && values[1][i].is_finite());

    let infinite_loss_approachable = (0..2u8).all(|b| {
        grid.iter()
            .zip(&values[b as usize])
            .filter(|(_, v)| v.is_infinite())
            .all(|(&g, _)| approachable(loss, b, g, step))
    });

    let loss_continuous = domain_ok && (0..2u8).all(|b| continuous_on_grid(loss, b, resolution));

    RegularityReport {
        gamma_compact: true,
        loss_continuous,
        finite_loss_prediction_exists,
        infinite_loss_approachable,
        is_regular: loss_continuous && finite_loss_prediction_exists && infinite_loss_approachable,
        resolution,
    }
}

fn approachable(loss: &LossFunction, outcome: Bit, gamma: f64, step: f64) -> bool {
    [-1.0, 1.0].iter().any(|&side| {
        (1..=30).all(|j| {
            let g = gamma + side * step * 0.5f64.powi(j);
            (0.0..=1.0).contains(&g) && loss.value(outcome, g).is_finite()
        })
    })
}

fn max_jump(loss: &LossFunction, outcome: Bit, resolution: usize, infinite_at: &[f64]) -> f64 {
    const MARGIN: f64 = 0.01;
    let step = 1.0 / (resolution - 1) as f64;
    let away = |g: f64| infinite_at.iter().all(|&x| (g - x).abs() >= MARGIN);
    let mut worst: f64 = 0.0;
    let mut prev = (0.0, loss.value(outcome, 0.0));
    for i in 1..resolution {
        let g = i as f64 * step;
        let v = loss.value(outcome, g);
        if prev.1.is_finite() && v.is_finite() && away(prev.0) && away(g) {
            worst = worst.max((v - prev.1).abs());
        }
        prev = (g, v);
    }
    worst
}

fn continuous_on_grid(loss: &LossFunction, outcome: Bit, resolution: usize) -> bool {
    let step = 1.0 / (resolution - 1) as f64;
    let fine = 2 * resolution - 1;
    let infinite_at: Vec<f64> = (0..fine)
        .map(|i| i as f64 * step / 2.0)
        .filter(|&g| loss.value(outcome, g).is_infinite())
        .collect();
    let coarse_jump = max_jump(loss, outcome, resolution, &infinite_at);
    let fine_jump = max_jump(loss, outcome, fine, &infinite_at);
    coarse_jump <= 1e-9 || fine_jump <= 0.75 * coarse_jump + 1e-12
}

/// Loss pairs `(λ(0, γᵢ), λ(1, γᵢ))` on a uniform grid of `[0, 1]`, in order of `γ`.
pub fn superprediction_curve(game: &Game, resolution: usize) -> Vec<Superscore> {
    let resolution = resolution.max(2);
    let loss = game.loss();
    (0..resolution)
        .map(|i| {
            let g = i as f64 / (resolution - 1) as f64;
            Superscore::new(loss.value(0, g), loss.value(1, g))
        })
        .collect()
}

/// Smallest excess `min_γ max_b (λ(b,γ) - s_b)` together with its witness.
pub(crate) fn superscore_excess(loss: &LossFunction, pair: Superscore) -> (f64, f64) {
    let excess = |g: f64| {
        let d = |b: Bit, s: f64| {
            if s == f64::INFINITY {
                f64::NEG_INFINITY
            } else {
                loss.value(b, g) - s
            }
        };
        d(0, pair.s0).max(d(1, pair.s1))
    };
    let interior = if loss.convex_in_gamma() {
        golden_section(excess, 0.0, 1.0, GOLDEN_TOL, GOLDEN_MAX_ITER)
    } else {
        grid_then_refine(excess, FALLBACK_GRID, GOLDEN_TOL, GOLDEN_MAX_ITER)
    };
    [(0.0, excess(0.0)), interior, (1.0, excess(1.0))]
        .into_iter()
        .fold((f64::NAN, f64::INFINITY), |best, (g, e)| if e < best.1 { (g, e) } else { best })
}

/// True iff some prediction `γ` has `λ(0,γ) ≤ s0 + tol` and `λ(1,γ) ≤ s1 + tol`.
pub fn is_superscore(game: &Game, pair: Superscore, tol: f64) -> bool {
    if pair.s0.is_nan() || pair.s1.is_nan() {
        return false;
    }
    superscore_excess(game.loss(), pair).1 <= tol
}

/// `(1 - p1)·λ(0,γ) + p1·λ(1,γ)` with `0·inf = 0`.
#[inline]
pub(crate) fn expected_loss_raw(loss: &LossFunction, p1: f64, gamma: f64) -> f64 {
    let term = |w: f64, b: Bit| if w == 0.0 { 0.0 } else { w * loss.value(b, gamma) };
    term(1.0 - p1, 0) + term(p1, 1)
}

pub fn expected_one_step_loss(loss: &LossFunction, p1: f64, prediction: Prediction) -> LossValue {
    debug_assert!((0.0..=1.0).contains(&p1));
    LossValue(expected_loss_raw(loss, p1, prediction.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn p(g: f64) -> Prediction {
        Prediction::new(g).unwrap()
    }

    #[test]
    fn loss_eval_closed_forms() {
        let log = LossFunction::log_loss();
        assert!((loss_eval(&log, 0, p(0.5)).unwrap().value() - LN_2).abs() < 1e-15);
        assert!(loss_eval(&log, 1, p(0.0)).unwrap().is_infinite());
        assert!(loss_eval(&log, 0, p(1.0)).unwrap().is_infinite());
        assert_eq!(loss_eval(&LossFunction::square_loss(), 1, p(1.0)).unwrap().value(), 0.0);
        assert_eq!(loss_eval(&LossFunction::absolute_loss(), 1, p(0.25)).unwrap().value(), 0.75);
    }

    #[test]
    fn prediction_rejects_out_of_range() {
        assert!(Prediction::new(1.5).is_err());
        assert!(Prediction::new(-0.1).is_err());
        assert!(Prediction::new(f64::NAN).is_err());
    }

    #[test]
    fn custom_domain_errors() {
        let neg = LossFunction::custom(|_, _| -1.0, true);
        assert!(matches!(loss_eval(&neg, 0, p(0.5)), Err(Error::Domain(_))));
        let nan = LossFunction::custom(|_, _| f64::NAN, true);
        assert!(matches!(loss_eval(&nan, 1, p(0.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn infinity_propagates_through_sums() {
        let total: LossValue = [LossValue::new(1.0).unwrap(), LossValue::INFINITY].into_iter().sum();
        assert!(total.is_infinite());
        assert_eq!(total.to_string(), "inf");
    }

    #[test]
    fn regularity_of_builtin_games() {
        for game in [Game::log_loss(), Game::square_loss(), Game::absolute_loss()] {
            let r = check_regularity(&game, 10_000);
            assert!(r.is_regular, "{} should be regular: {r:?}", game.name());
            assert_eq!(r.resolution, 10_000);
        }
    }

    #[test]
    fn everywhere_infinite_loss_is_not_regular() {
        let game = Game::new(LossFunction::custom(|_, _| f64::INFINITY, true));
        let r = check_regularity(&game, 1000);
        assert!(!r.finite_loss_prediction_exists);
        assert!(!r.is_regular);
    }

    #[test]
    fn jump_discontinuity_is_detected() {
        let game = Game::new(LossFunction::custom(|b, g| if g < 0.4 { b as f64 } else { 1.0 + b as f64 }, false));
        let r = check_regularity(&game, 1000);
        assert!(!r.loss_continuous);
        assert!(!r.is_regular);
    }

    #[test]
    fn isolated_infinity_inside_infinite_segment_is_not_approachable() {
        let table = LossTable::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 0.1, 0.2, f64::INFINITY, f64::INFINITY],
            vec![1.0, 0.5, 0.2, 0.1, 0.0],
        )
        .unwrap();
        let game = Game::new(LossFunction::from_table(table, true).unwrap());
        let r = check_regularity(&game, 101);
        assert!(!r.infinite_loss_approachable);
    }

    #[test]
    fn superprediction_curve_points() {
        let sq = superprediction_curve(&Game::square_loss(), 5);
        assert_eq!(sq[0], Superscore::new(0.0, 1.0));
        let log = superprediction_curve(&Game::log_loss(), 3);
        assert!((log[1].s0 - LN_2).abs() < 1e-15 && (log[1].s1 - LN_2).abs() < 1e-15);
        let abs = superprediction_curve(&Game::absolute_loss(), 5);
        assert_eq!(abs[1], Superscore::new(0.25, 0.75));
    }

    #[test]
    fn superscore_examples() {
        assert!(is_superscore(&Game::log_loss(), Superscore::new(LN_2, LN_2), 1e-12));
        assert!(is_superscore(&Game::square_loss(), Superscore::new(1.0, 1.0), 0.0));
        assert!(is_superscore(&Game::log_loss(), Superscore::new(0.0, f64::INFINITY), 0.0));
        assert!(!is_superscore(&Game::log_loss(), Superscore::new(0.5, 0.5), 1e-9));
    }

    #[test]
    fn log_loss_origin_is_not_a_superscore_grid_oracle() {
        // exhaustive grid: max(λ(0,γ), λ(1,γ)) never drops to 0
        let loss = LossFunction::log_loss();
        let best = (0..=100_000)
            .map(|i| {
                let g = i as f64 / 100_000.0;
                loss.value(0, g).max(loss.value(1, g))
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best > 0.5);
        assert!(!is_superscore(&Game::log_loss(), Superscore::new(0.0, 0.0), 1e-9));
    }

    #[test]
    fn expected_loss_examples() {
        let log = LossFunction::log_loss();
        assert!((expected_one_step_loss(&log, 0.5, p(0.5)).value() - LN_2).abs() < 1e-15);
        let sq = expected_one_step_loss(&LossFunction::square_loss(), 0.3, p(0.3)).value();
        assert!((sq - (0.7 * 0.09 + 0.3 * 0.49)).abs() < 1e-15);
        assert!((sq - 0.21).abs() < 1e-12);
        assert!(expected_one_step_loss(&log, 1.0, p(0.0)).is_infinite());
        // 0·inf = 0
        assert_eq!(expected_one_step_loss(&log, 0.0, p(0.0)).value(), 0.0);
    }

    #[test]
    fn loss_table_interpolates_and_parses_inf() {
        let json = r#"{"kind":"table","grid":[0,0.5,1],"loss0":[0,0.5,"inf"],"loss1":["inf",0.5,0]}"#;
        let loss = LossFunction::from_json(json).unwrap();
        assert_eq!(loss.kind(), LossKind::Custom);
        assert!(!loss.convex_in_gamma());
        assert!((loss.value(0, 0.25) - 0.25).abs() < 1e-15);
        assert!(loss.value(0, 0.75).is_finite());
        assert!(loss.value(0, 0.999_999) > loss.value(0, 0.75));
        assert!(loss.value(0, 1.0).is_infinite());
        assert_eq!(loss.value(0, 0.5), 0.5);
        assert!(loss.value(1, 0.0).is_infinite());
        assert!(loss.value(1, 1e-9).is_finite());
        let r = check_regularity(&Game::new(loss), 1001);
        assert!(r.is_regular, "{r:?}");
    }

    #[test]
    fn loss_table_rejects_bad_grid() {
        assert!(LossTable::new(vec![0.0, 0.6, 0.5, 1.0], vec![0.0; 4], vec![0.0; 4]).is_err());
        assert!(LossTable::new(vec![0.1, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(LossTable::new(vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0; 2]).is_err());
    }
}
