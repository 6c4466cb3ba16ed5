//! C ABI over the `entrogame` library.
//!
//! Objects cross the boundary as opaque handles created by `eg_*_new` or
//! `eg_*_from_json` and released by the matching `eg_*_free`. Every fallible
//! call returns an [`EgStatus`] and writes its result through an out-pointer;
//! on failure `eg_last_error_message` describes the error for the calling
//! thread. Panics are caught and reported as `EG_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use entrogame::aggregation::{
    aggregate_predict, aggregate_update, max_mixability_eta, mixability_test_eta, AggregatorState, PoolDescriptor,
    DEFAULT_CONCAVITY_TOL,
};
use entrogame::entropy::{entropy_rate, n_step_entropy};
use entrogame::games::{loss_eval, Game, LossFunction, Prediction};
use entrogame::sources::SourceModel;
use entrogame::strategies::{optimal_prediction, DEFAULT_OPT_TOL};
use entrogame::{Bit, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    NotErgodic = 4,
    NotMixable = 5,
    ZeroProbability = 6,
    TooLarge = 7,
    NoMinimizer = 8,
    DegeneratePool = 9,
    InvariantViolation = 10,
    Internal = 11,
}

/// Built-in games.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgGameKind {
    LogLoss = 0,
    SquareLoss = 1,
    AbsoluteLoss = 2,
}

/// Opaque game handle.
pub struct EgGame(Game);

/// Opaque source handle.
pub struct EgSource(SourceModel);

/// Opaque aggregator handle; remembers the outcomes it has been fed.
pub struct EgAggregator {
    state: AggregatorState,
    history: Vec<Bit>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(EgStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match &err {
            Error::Domain(_) | Error::InvalidPrediction(_) | Error::InvalidProbability(_) => EgStatus::Domain,
            Error::NotErgodic(_) => EgStatus::NotErgodic,
            Error::NotMixable(_) => EgStatus::NotMixable,
            Error::ZeroProbabilityHistory(_) => EgStatus::ZeroProbability,
            Error::TooLargeForExact { .. } => EgStatus::TooLarge,
            Error::NoMinimizer => EgStatus::NoMinimizer,
            Error::DegeneratePool(_) => EgStatus::DegeneratePool,
            Error::InvariantViolation(_) => EgStatus::InvariantViolation,
            _ => EgStatus::InvalidArgument,
        };
        Failure(status, err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EgStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EgStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(EgStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn bits<'a>(data: *const u8, len: usize) -> Result<&'a [Bit], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("bit array"));
    }
    let slice = std::slice::from_raw_parts(data, len);
    if let Some(b) = slice.iter().find(|&&b| b > 1) {
        return Err(Failure(EgStatus::InvalidArgument, format!("bit value {b} is not 0 or 1")));
    }
    Ok(slice)
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Built-in game; `kind` is an `EgGameKind` value.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_game_new(kind: u32, out: *mut *mut EgGame) -> EgStatus {
    guard(|| {
        let game = match kind {
            k if k == EgGameKind::LogLoss as u32 => Game::log_loss(),
            k if k == EgGameKind::SquareLoss as u32 => Game::square_loss(),
            k if k == EgGameKind::AbsoluteLoss as u32 => Game::absolute_loss(),
            other => return Err(Failure(EgStatus::InvalidArgument, format!("unknown game kind {other}"))),
        };
        write(out, boxed(EgGame(game)))
    })
}

/// Game from a JSON loss table: `{"kind":"table","grid":[..],"loss0":[..],"loss1":[..]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_game_from_json(json: *const c_char, out: *mut *mut EgGame) -> EgStatus {
    guard(|| {
        let loss = LossFunction::from_json(c_str(json, "json")?)?;
        write(out, boxed(EgGame(Game::new(loss))))
    })
}

/// # Safety
/// `game` must come from `eg_game_new`/`eg_game_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn eg_game_free(game: *mut EgGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// `λ(outcome, gamma)` in nats; may be `+inf`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_loss_eval(game: *const EgGame, outcome: u8, gamma: f64, out: *mut f64) -> EgStatus {
    guard(|| {
        let game = deref(game, "game")?;
        let value = loss_eval(game.0.loss(), outcome, Prediction::new(gamma)?)?;
        write(out, value.value())
    })
}

/// Source from a JSON descriptor (`bernoulli`, `markov` or `hmm`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_source_from_json(json: *const c_char, out: *mut *mut EgSource) -> EgStatus {
    guard(|| {
        let source = SourceModel::from_json(c_str(json, "json")?)?;
        write(out, boxed(EgSource(source)))
    })
}

/// # Safety
/// `source` must come from `eg_source_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn eg_source_free(source: *mut EgSource) {
    if !source.is_null() {
        drop(Box::from_raw(source));
    }
}

/// Probability of the string `w[0..len]` under the stationary law.
///
/// # Safety
/// `w` must point to `len` readable bytes (each 0 or 1).
#[no_mangle]
pub unsafe extern "C" fn eg_string_probability(
    source: *const EgSource,
    w: *const u8,
    len: usize,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let p = deref(source, "source")?.0.string_probability(bits(w, len)?)?;
        write(out, p)
    })
}

/// `P(1 | history)`.
///
/// # Safety
/// `history` must point to `len` readable bytes (each 0 or 1).
#[no_mangle]
pub unsafe extern "C" fn eg_conditional_next_probability(
    source: *const EgSource,
    history: *const u8,
    len: usize,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let p = deref(source, "source")?.0.conditional_next_probability(bits(history, len)?)?;
        write(out, p)
    })
}

/// Exact n-step generalized entropy `H_n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_n_step_entropy(
    game: *const EgGame,
    source: *const EgSource,
    n: usize,
    out: *mut f64,
) -> EgStatus {
    guard(|| {
        let h = n_step_entropy(&deref(game, "game")?.0, &deref(source, "source")?.0, n)?;
        write(out, h)
    })
}

/// Entropy-rate estimate. `converged_at` receives the index from which
/// `H_{1|n}` is stationary, or -1 when the cap was reached first.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_entropy_rate(
    game: *const EgGame,
    source: *const EgSource,
    tol: f64,
    n_cap: usize,
    rate: *mut f64,
    converged_at: *mut i64,
) -> EgStatus {
    guard(|| {
        let report = entropy_rate(&deref(game, "game")?.0, &deref(source, "source")?.0, tol, n_cap)?;
        write(rate, report.rate_estimate)?;
        write(converged_at, report.converged_at.map_or(-1, |n| n as i64))
    })
}

/// Prediction minimizing the expected loss when the next bit is 1 with
/// probability `p1`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_optimal_prediction(game: *const EgGame, p1: f64, out: *mut f64) -> EgStatus {
    guard(|| {
        let g = optimal_prediction(deref(game, "game")?.0.loss(), p1, DEFAULT_OPT_TOL)?;
        write(out, g.value())
    })
}

/// Curvature test at learning rate `eta` with `resolution` curve points.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_mixability_test(
    game: *const EgGame,
    eta: f64,
    resolution: usize,
    mixable: *mut bool,
) -> EgStatus {
    guard(|| {
        let r = mixability_test_eta(&deref(game, "game")?.0, eta, resolution, DEFAULT_CONCAVITY_TOL)?;
        write(mixable, r.mixable)
    })
}

/// Largest mixable learning rate found by bisection; `found` is false when
/// the game fails the test everywhere in the searched range.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_max_mixability_eta(
    game: *const EgGame,
    resolution: usize,
    tol: f64,
    eta: *mut f64,
    found: *mut bool,
) -> EgStatus {
    guard(|| {
        let best = max_mixability_eta(&deref(game, "game")?.0, resolution, tol)?;
        write(eta, best.unwrap_or(0.0))?;
        write(found, best.is_some())
    })
}

/// Aggregator over the pool described by `pool_json`
/// (`{"experts":[...],"eta":1.0}`). Fails with `EG_STATUS_NOT_MIXABLE` when the
/// game is not mixable at the pool's learning rate.
///
/// # Safety
/// `game` must be valid, `pool_json` NUL-terminated and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn eg_aggregator_new(
    game: *const EgGame,
    pool_json: *const c_char,
    out: *mut *mut EgAggregator,
) -> EgStatus {
    guard(|| {
        let pool = PoolDescriptor::from_json(c_str(pool_json, "pool_json")?)?;
        let state = pool.build(&deref(game, "game")?.0)?;
        write(out, boxed(EgAggregator { state, history: Vec::new() }))
    })
}

/// The aggregator's prediction for the next outcome.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eg_aggregator_predict(agg: *const EgAggregator, out: *mut f64) -> EgStatus {
    guard(|| {
        let agg = deref(agg, "aggregator")?;
        write(out, aggregate_predict(&agg.state, &agg.history)?.value())
    })
}

/// Feeds the next outcome.
///
/// # Safety
/// `agg` must be a live aggregator handle.
#[no_mangle]
pub unsafe extern "C" fn eg_aggregator_update(agg: *mut EgAggregator, outcome: u8) -> EgStatus {
    guard(|| {
        let agg = agg.as_mut().ok_or_else(|| null("aggregator"))?;
        let outcome = bits(&outcome, 1)?[0];
        aggregate_update(&mut agg.state, &agg.history, outcome)?;
        agg.history.push(outcome);
        Ok(())
    })
}

/// Number of experts in the pool.
///
/// # Safety
/// `agg` must be a live aggregator handle.
#[no_mangle]
pub unsafe extern "C" fn eg_aggregator_len(agg: *const EgAggregator) -> usize {
    agg.as_ref().map_or(0, |a| a.state.experts().len())
}

/// Copies the normalized expert weights into `out[0..len]`; `len` must equal
/// the pool size.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn eg_aggregator_weights(agg: *const EgAggregator, out: *mut f64, len: usize) -> EgStatus {
    guard(|| {
        let weights = deref(agg, "aggregator")?.state.weights();
        if len != weights.len() {
            return Err(Failure(EgStatus::InvalidArgument, format!("pool has {} experts, not {len}", weights.len())));
        }
        if out.is_null() {
            return Err(null("output pointer"));
        }
        ptr::copy_nonoverlapping(weights.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `agg` must come from `eg_aggregator_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn eg_aggregator_free(agg: *mut EgAggregator) {
    if !agg.is_null() {
        drop(Box::from_raw(agg));
    }
}
