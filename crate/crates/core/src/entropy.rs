//! Exact n-step, conditional and limiting generalized entropies.
//!
//! `H_{1|n}` is the expected optimal one-step loss after an `n`-bit history:
//! `Σ_w P(w) · min_γ Σ_a P(a | w) λ(a, γ)`. The n-step entropy follows from the
//! chain rule `H_n = Σ_{i<n} H_{1|i}` and the conditional entropy from
//! `H_{n|m} = H_{n+m} - H_m`.
//!
//! Histories are enumerated as a binary tree whose nodes carry the source
//! filter state and the running probability, so no history strings are built.
//! Subtrees below a fixed split depth are evaluated in parallel and reduced in
//! index order, which keeps results bit-reproducible.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::games::{Game, LossFunction};
use crate::sources::{FilterState, SourceKind, SourceModel};
use crate::strategies::{optimal_point, DEFAULT_OPT_TOL};
use crate::{Bit, Error, Result};

/// Largest history length enumerated exactly.
pub const N_MAX_EXACT: usize = 22;
/// Largest `n + m` for which the direct double sum cross-checks `H_{n|m}`.
pub const DIRECT_CHECK_MAX: usize = 12;

const SPLIT_DEPTH: usize = 10;

/// Default convergence tolerance for [`entropy_rate`].
pub fn default_tolerance(source: &SourceModel) -> f64 {
    match source.kind() {
        SourceKind::HiddenMarkov { .. } => 1e-6,
        _ => 1e-9,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub game: String,
    pub source: String,
    pub unit: String,
    pub n_max: usize,
    /// `H_1, …, H_{n_max}`.
    #[serde(rename = "H_n")]
    pub h_n: Vec<f64>,
    /// `H_{1|0}, …, H_{1|n_max-1}`.
    #[serde(rename = "H_1_given_n")]
    pub h_1_given_n: Vec<f64>,
    pub rate_estimate: f64,
    /// `(H_{1|n_max-1}, H_1)`.
    pub bracket: (f64, f64),
    pub converged: bool,
    /// Smallest `n` from which `H_{1|n}` is stationary within `tolerance`.
    pub converged_at: Option<usize>,
    pub tolerance: f64,
}

impl EntropyReport {
    pub const CSV_SCHEMA: &'static str = "# schema: entrogame/entropy-csv/v1 unit=nats";

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_SCHEMA)?;
        writeln!(out, "n,H_1_given_n")?;
        for (n, h) in self.h_1_given_n.iter().enumerate() {
            writeln!(out, "{n},{h:.12}")?;
        }
        Ok(())
    }
}

fn check_exact(n: usize) -> Result<()> {
    if n > N_MAX_EXACT {
        Err(Error::TooLargeForExact { n, cap: N_MAX_EXACT })
    } else {
        Ok(())
    }
}

/// Minimum expected one-step loss at a given conditional, memoized by the
/// exact bit pattern of `p1`.
struct OneStep<'a> {
    loss: &'a LossFunction,
    memo: HashMap<u64, f64>,
}

impl<'a> OneStep<'a> {
    fn new(loss: &'a LossFunction) -> Self {
        OneStep { loss, memo: HashMap::new() }
    }

    fn min_loss(&mut self, p1: f64) -> Result<f64> {
        if let Some(&v) = self.memo.get(&p1.to_bits()) {
            return Ok(v);
        }
        let (_, v) = optimal_point(self.loss, p1, DEFAULT_OPT_TOL)?;
        self.memo.insert(p1.to_bits(), v);
        Ok(v)
    }
}

struct Node {
    state: FilterState,
    prob: f64,
}

fn children<'a>(source: &'a SourceModel, node: &Node) -> impl Iterator<Item = Node> + 'a {
    let base = (node.state.clone(), node.prob);
    (0..2u8).filter_map(move |b| {
        let mut state = base.0.clone();
        let prob = base.1 * source.filter_push(&mut state, b);
        (prob > 0.0).then_some(Node { state, prob })
    })
}

fn accumulate(
    source: &SourceModel,
    one_step: &mut OneStep<'_>,
    node: &Node,
    depth: usize,
    max_depth: usize,
    sums: &mut [f64],
) -> Result<()> {
    let p1 = source.filter_p1(&node.state);
    sums[depth] += node.prob * one_step.min_loss(p1)?;
    if depth < max_depth {
        for child in children(source, node) {
            accumulate(source, one_step, &child, depth + 1, max_depth, sums)?;
        }
    }
    Ok(())
}

/// `[H_{1|0}, …, H_{1|n_max}]` in a single tree walk.
pub fn conditional_entropies(game: &Game, source: &SourceModel, n_max: usize) -> Result<Vec<f64>> {
    check_exact(n_max)?;
    let loss = game.loss();
    let split = n_max.min(SPLIT_DEPTH);
    let mut sums = vec![0.0; n_max + 1];
    let mut one_step = OneStep::new(loss);

    let mut frontier = vec![Node { state: source.filter()?, prob: 1.0 }];
    for sum in sums.iter_mut().take(split) {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for node in &frontier {
            *sum += node.prob * one_step.min_loss(source.filter_p1(&node.state))?;
            next.extend(children(source, node));
        }
        frontier = next;
    }

    let partials: Vec<Vec<f64>> = frontier
        .par_iter()
        .map(|node| {
            let mut local = vec![0.0; n_max + 1];
            let mut one_step = OneStep::new(loss);
            accumulate(source, &mut one_step, node, split, n_max, &mut local)?;
            Ok(local)
        })
        .collect::<Result<_>>()?;
    for partial in &partials {
        for (s, p) in sums.iter_mut().zip(partial) {
            *s += p;
        }
    }
    Ok(sums)
}

/// `H_{1|n}`.
pub fn one_step_conditional_entropy(game: &Game, source: &SourceModel, n: usize) -> Result<f64> {
    Ok(conditional_entropies(game, source, n)?[n])
}

/// `H_n = Σ_{i<n} H_{1|i}`.
pub fn n_step_entropy(game: &Game, source: &SourceModel, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    check_exact(n)?;
    Ok(conditional_entropies(game, source, n - 1)?.iter().sum())
}

/// `H_{n|m}` from the chain rule, cross-checked against the direct double sum
/// when `n + m ≤ DIRECT_CHECK_MAX`.
pub fn conditional_entropy(game: &Game, source: &SourceModel, n: usize, m: usize) -> Result<f64> {
    check_exact(n + m)?;
    if n == 0 {
        return Ok(0.0);
    }
    let h = conditional_entropies(game, source, n + m - 1)?;
    let total: f64 = h.iter().sum();
    let prefix: f64 = h[..m].iter().sum();
    let chain = total - prefix;
    if n + m <= DIRECT_CHECK_MAX {
        let direct = conditional_entropy_direct(game, source, n, m)?;
        let scale = 1.0f64.max(chain.abs());
        if (direct - chain).abs() > 1e-8 * scale {
            return Err(Error::InvariantViolation(format!(
                "H_{{{n}|{m}}}: chain rule gives {chain}, direct sum gives {direct}"
            )));
        }
    }
    Ok(chain)
}

/// `H_{n|m}` as the literal sum over all `wx ∈ Σ^{m+n}` of
/// `P(wx) · Σ_{i<n} λ(xᵢ, γ*(w·x₀..xᵢ₋₁))`, with one optimal prediction per prefix.
pub fn conditional_entropy_direct(game: &Game, source: &SourceModel, n: usize, m: usize) -> Result<f64> {
    let len = n + m;
    if len > DIRECT_CHECK_MAX + 4 {
        return Err(Error::TooLargeForExact { n: len, cap: DIRECT_CHECK_MAX + 4 });
    }
    let loss = game.loss();
    let mut prefix_prediction: HashMap<(usize, usize), f64> = HashMap::new();
    let mut total = 0.0;
    let mut word = vec![0 as Bit; len];
    for code in 0..(1usize << len) {
        for (i, b) in word.iter_mut().enumerate() {
            *b = ((code >> (len - 1 - i)) & 1) as Bit;
        }
        let p = source.string_probability(&word)?;
        if p == 0.0 {
            continue;
        }
        let mut continuation = 0.0;
        for i in m..len {
            let key = (i, code >> (len - i));
            let gamma = match prefix_prediction.get(&key) {
                Some(&g) => g,
                None => {
                    let p1 = source.conditional_next_probability(&word[..i])?;
                    let (g, _) = optimal_point(loss, p1, DEFAULT_OPT_TOL)?;
                    prefix_prediction.insert(key, g);
                    g
                }
            };
            continuation += loss.value(word[i], gamma);
        }
        total += p * continuation;
    }
    Ok(total)
}

/// Iterates `H_{1|n}` until successive values agree within `tol` or `n = n_cap`.
///
/// Finite-memory sources stop at their Markov order `k`, where `H_{1|n}` is
/// exactly constant from then on.
pub fn entropy_rate(game: &Game, source: &SourceModel, tol: f64, n_cap: usize) -> Result<EntropyReport> {
    let n_cap = n_cap.min(N_MAX_EXACT);
    let (h, converged_at) = match source.markov_order() {
        Some(k) if k <= n_cap => (conditional_entropies(game, source, k)?, Some(k)),
        Some(_) => (conditional_entropies(game, source, n_cap)?, None),
        None => {
            let mut hi = n_cap.min(4);
            loop {
                let h = conditional_entropies(game, source, hi)?;
                if let Some(n) = (1..h.len()).find(|&n| (h[n] - h[n - 1]).abs() < tol) {
                    break (h[..=n].to_vec(), Some(n - 1));
                }
                if hi == n_cap {
                    break (h, None);
                }
                hi = (hi + 4).min(n_cap);
            }
        }
    };
    let h_n: Vec<f64> = h
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let rate_estimate = *h.last().expect("at least H_{1|0}");
    Ok(EntropyReport {
        game: game.name().to_string(),
        source: source.id(),
        unit: "nats".into(),
        n_max: h.len(),
        bracket: (rate_estimate, h[0]),
        h_n,
        h_1_given_n: h,
        rate_estimate,
        converged: converged_at.is_some(),
        converged_at,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sampled estimate of `H_{1|n}`: the mean over sampled histories `w` of the
/// optimal expected one-step loss given `w`. History `i` uses seed `seed + i`.
pub fn monte_carlo_conditional_entropy(
    game: &Game,
    source: &SourceModel,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let loss = game.loss();
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let history = if n == 0 { Vec::new() } else { source.sample_bits(n, seed.wrapping_add(i as u64))? };
            let mut state = source.filter()?;
            for &b in &history {
                source.filter_push(&mut state, b);
            }
            optimal_point(loss, source.filter_p1(&state), DEFAULT_OPT_TOL).map(|(_, v)| v)
        })
        .collect::<Result<_>>()?;
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate { mean, std_error: (var / count).sqrt(), samples })
}

/// Debug form of the estimator: every history in `Σⁿ` weighted by its exact
/// probability. Degenerates to the exact `H_{1|n}`.
pub fn exhaustive_conditional_entropy(game: &Game, source: &SourceModel, n: usize) -> Result<McEstimate> {
    if n > DIRECT_CHECK_MAX + 4 {
        return Err(Error::TooLargeForExact { n, cap: DIRECT_CHECK_MAX + 4 });
    }
    let loss = game.loss();
    let mut mean = 0.0;
    let mut word = vec![0 as Bit; n];
    for code in 0..(1usize << n) {
        for (i, b) in word.iter_mut().enumerate() {
            *b = ((code >> (n - 1 - i)) & 1) as Bit;
        }
        let p = source.string_probability(&word)?;
        if p > 0.0 {
            let p1 = source.conditional_next_probability(&word)?;
            mean += p * optimal_point(loss, p1, DEFAULT_OPT_TOL)?.1;
        }
    }
    Ok(McEstimate { mean, std_error: 0.0, samples: 1 << n })
}
