//! Stationary binary sources with exact probabilities.
//!
//! Three families are supported: i.i.d. Bernoulli, order-`k` Markov chains and
//! hidden Markov models with binary emissions. Every model starts from its
//! stationary law, so the process it defines is stationary.
//!
//! Markov contexts are integer-coded with the oldest bit as the most
//! significant bit: the context `"01"` is `1`, `"10"` is `2`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{format_bits, Bit, Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const MAX_MARKOV_ORDER: usize = 10;
const MAX_HIDDEN_STATES: usize = 64;

/// The seeded generator used for every sampled path (ChaCha with 8 rounds,
/// seeded through `SeedableRng::seed_from_u64`).
pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64) -> PathRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SourceKind {
    Bernoulli { p1: f64 },
    /// `p1_given[c]` is `P(next = 1 | context c)` for each of the `2^k` contexts.
    MarkovOrderK { k: usize, p1_given: Vec<f64> },
    /// `transition[i][j]` is `P(hidden j | hidden i)`; `emit1[i]` is `P(bit 1 | hidden i)`.
    HiddenMarkov { transition: Vec<Vec<f64>>, emit1: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub is_ergodic: bool,
}

/// A sampled path together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub bits: Vec<Bit>,
    pub seed: u64,
    pub source_id: String,
}

/// JSON source descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceDescriptor {
    Bernoulli { p1: f64 },
    Markov { k: usize, p1_given: BTreeMap<String, f64> },
    Hmm {
        #[serde(rename = "A")]
        transition: Vec<Vec<f64>>,
        emit1: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct SourceModel {
    kind: SourceKind,
    ergodicity: ErgodicityReport,
    /// Stationary law of the context chain (Markov) or hidden chain (HMM).
    stationary: Option<Vec<f64>>,
    /// Markov only: `prefix_marginals[l][w]` is `P(w)` for `|w| = l ≤ k`.
    prefix_marginals: Vec<Vec<f64>>,
    unreachable: String,
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

impl SourceModel {
    pub fn bernoulli(p1: f64) -> Result<Self> {
        check_probability(p1)?;
        Ok(SourceModel {
            kind: SourceKind::Bernoulli { p1 },
            ergodicity: ErgodicityReport { irreducible: true, aperiodic: true, is_ergodic: true },
            stationary: Some(vec![1.0 - p1, p1]),
            prefix_marginals: Vec::new(),
            unreachable: String::new(),
        })
    }

    /// Order-`k` Markov chain; `p1_given` is indexed by integer-coded context.
    pub fn markov(k: usize, p1_given: Vec<f64>) -> Result<Self> {
        if k > MAX_MARKOV_ORDER {
            return Err(Error::InvalidSource(format!("Markov order {k} exceeds the supported maximum {MAX_MARKOV_ORDER}")));
        }
        let states = 1usize << k;
        if p1_given.len() != states {
            return Err(Error::InvalidSource(format!(
                "order-{k} Markov source needs {states} context probabilities, got {}",
                p1_given.len()
            )));
        }
        for &p in &p1_given {
            check_probability(p)?;
        }
        let mask = states - 1;
        let successors = |c: usize| -> Vec<(usize, f64)> {
            let next = (c << 1) & mask;
            vec![(next, 1.0 - p1_given[c]), (next | 1, p1_given[c])]
        };
        let matrix = chain_matrix(states, successors);
        let (ergodicity, unreachable) = analyze_chain(&matrix);
        let unreachable = unreachable
            .iter()
            .map(|&c| format!("{:?}", context_string(c, k)))
            .collect::<Vec<_>>()
            .join(", ");
        let stationary = ergodicity.irreducible.then(|| stationary_law(&matrix));
        let prefix_marginals = match &stationary {
            Some(pi) => {
                let mut levels = vec![Vec::new(); k + 1];
                levels[k] = pi.clone();
                for l in (0..k).rev() {
                    // marginal of the first l bits of a k-block
                    levels[l] = (0..1usize << l)
                        .map(|w| levels[l + 1][w << 1] + levels[l + 1][(w << 1) | 1])
                        .collect();
                }
                levels
            }
            None => Vec::new(),
        };
        Ok(SourceModel {
            kind: SourceKind::MarkovOrderK { k, p1_given },
            ergodicity,
            stationary,
            prefix_marginals,
            unreachable: format!("contexts [{unreachable}]"),
        })
    }

    /// Order-1 chain that flips the previous bit with probability `q`.
    pub fn symmetric_markov(q: f64) -> Result<Self> {
        check_probability(q)?;
        Self::markov(1, vec![q, 1.0 - q])
    }

    pub fn hidden_markov(transition: Vec<Vec<f64>>, emit1: Vec<f64>) -> Result<Self> {
        let m = transition.len();
        if m == 0 || m > MAX_HIDDEN_STATES {
            return Err(Error::InvalidSource(format!("hidden state count {m} must be in 1..={MAX_HIDDEN_STATES}")));
        }
        if emit1.len() != m {
            return Err(Error::InvalidSource(format!("emit1 has {} entries for {m} hidden states", emit1.len())));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidSource(format!("transition row {i} has {} entries, expected {m}", row.len())));
            }
            for &p in row {
                check_probability(p)?;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidSource(format!("transition row {i} sums to {sum}, not 1")));
            }
        }
        for &e in &emit1 {
            check_probability(e)?;
        }
        let matrix = DMatrix::from_fn(m, m, |i, j| transition[i][j]);
        let (ergodicity, unreachable) = analyze_chain(&matrix);
        let stationary = ergodicity.irreducible.then(|| stationary_law(&matrix));
        Ok(SourceModel {
            kind: SourceKind::HiddenMarkov { transition, emit1 },
            ergodicity,
            stationary,
            prefix_marginals: Vec::new(),
            unreachable: format!("hidden states {unreachable:?}"),
        })
    }

    pub fn from_descriptor(desc: &SourceDescriptor) -> Result<Self> {
        match desc {
            SourceDescriptor::Bernoulli { p1 } => Self::bernoulli(*p1),
            SourceDescriptor::Markov { k, p1_given } => {
                let states = 1usize << (*k).min(MAX_MARKOV_ORDER + 1);
                let mut table = vec![f64::NAN; states];
                for (ctx, &p) in p1_given {
                    if ctx.len() != *k {
                        return Err(Error::InvalidSource(format!("context {ctx:?} does not have length k = {k}")));
                    }
                    let bits = crate::parse_bits(ctx)?;
                    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                    if idx < states {
                        table[idx] = p;
                    }
                }
                if let Some(missing) = table.iter().position(|p| p.is_nan()) {
                    return Err(Error::InvalidSource(format!(
                        "p1_given is missing context {:?}",
                        context_string(missing, *k)
                    )));
                }
                Self::markov(*k, table)
            }
            SourceDescriptor::Hmm { transition, emit1 } => Self::hidden_markov(transition.clone(), emit1.clone()),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_descriptor(&serde_json::from_str(json)?)
    }

    pub fn descriptor(&self) -> SourceDescriptor {
        match &self.kind {
            SourceKind::Bernoulli { p1 } => SourceDescriptor::Bernoulli { p1: *p1 },
            SourceKind::MarkovOrderK { k, p1_given } => SourceDescriptor::Markov {
                k: *k,
                p1_given: p1_given.iter().enumerate().map(|(c, &p)| (context_string(c, *k), p)).collect(),
            },
            SourceKind::HiddenMarkov { transition, emit1 } => {
                SourceDescriptor::Hmm { transition: transition.clone(), emit1: emit1.clone() }
            }
        }
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    /// Short identifier used in sample and experiment records.
    pub fn id(&self) -> String {
        match &self.kind {
            SourceKind::Bernoulli { p1 } => format!("bernoulli(p1={p1})"),
            SourceKind::MarkovOrderK { k, p1_given } => format!("markov(k={k},p1_given={p1_given:?})"),
            SourceKind::HiddenMarkov { emit1, .. } => format!("hmm(m={},emit1={emit1:?})", emit1.len()),
        }
    }

    /// Markov order, if the source has finite memory (`Some(0)` for Bernoulli).
    pub fn markov_order(&self) -> Option<usize> {
        match &self.kind {
            SourceKind::Bernoulli { .. } => Some(0),
            SourceKind::MarkovOrderK { k, .. } => Some(*k),
            SourceKind::HiddenMarkov { .. } => None,
        }
    }

    pub fn is_ergodic(&self) -> ErgodicityReport {
        self.ergodicity
    }

    fn require_ergodic(&self) -> Result<()> {
        if self.ergodicity.is_ergodic {
            Ok(())
        } else if !self.ergodicity.irreducible {
            Err(Error::NotErgodic(format!("chain is reducible; unreachable {}", self.unreachable)))
        } else {
            Err(Error::NotErgodic("chain is periodic".into()))
        }
    }

    fn stationary(&self) -> Result<&[f64]> {
        self.stationary
            .as_deref()
            .ok_or_else(|| Error::NotErgodic(format!("chain is reducible; unreachable {}", self.unreachable)))
    }

    /// Stationary law over next-bit outcomes (Bernoulli), contexts (Markov)
    /// or hidden states (HMM).
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        self.stationary().map(<[f64]>::to_vec)
    }

    /// Filter state at the empty history.
    pub fn filter(&self) -> Result<FilterState> {
        let state = match &self.kind {
            SourceKind::Bernoulli { .. } => FilterState::Memoryless,
            SourceKind::MarkovOrderK { .. } => {
                self.stationary()?;
                FilterState::Context { len: 0, ctx: 0 }
            }
            SourceKind::HiddenMarkov { .. } => FilterState::Hidden { belief: self.stationary()?.to_vec() },
        };
        Ok(state)
    }

    /// `P(next = 1 | history)` for the history summarized by `state`.
    #[inline]
    pub fn filter_p1(&self, state: &FilterState) -> f64 {
        match (&self.kind, state) {
            (SourceKind::Bernoulli { p1 }, _) => *p1,
            (SourceKind::MarkovOrderK { k, p1_given }, FilterState::Context { len, ctx }) => {
                if *len >= *k {
                    p1_given[*ctx]
                } else {
                    let here = self.prefix_marginals[*len][*ctx];
                    if here == 0.0 {
                        0.0
                    } else {
                        self.prefix_marginals[*len + 1][(*ctx << 1) | 1] / here
                    }
                }
            }
            (SourceKind::HiddenMarkov { emit1, .. }, FilterState::Hidden { belief }) => {
                belief.iter().zip(emit1).map(|(b, e)| b * e).sum::<f64>().clamp(0.0, 1.0)
            }
            _ => unreachable!("filter state does not belong to this source"),
        }
    }

    /// Appends `bit` to the summarized history and returns `P(bit | history)`.
    ///
    /// A returned factor of zero leaves the state unspecified.
    pub fn filter_push(&self, state: &mut FilterState, bit: Bit) -> f64 {
        let p1 = self.filter_p1(state);
        let factor = if bit == 1 { p1 } else { 1.0 - p1 };
        match (&self.kind, state) {
            (SourceKind::Bernoulli { .. }, _) => {}
            (SourceKind::MarkovOrderK { k, .. }, FilterState::Context { len, ctx }) => {
                let mask = (1usize << k) - 1;
                *ctx = ((*ctx << 1) | bit as usize) & if *len >= *k { mask } else { usize::MAX };
                *len += 1;
            }
            (SourceKind::HiddenMarkov { transition, emit1 }, FilterState::Hidden { belief }) => {
                if factor > 0.0 {
                    let m = belief.len();
                    let mut next = vec![0.0; m];
                    for (i, &w) in belief.iter().enumerate() {
                        let emit = if bit == 1 { emit1[i] } else { 1.0 - emit1[i] };
                        let mass = w * emit;
                        if mass == 0.0 {
                            continue;
                        }
                        for (n, &a) in next.iter_mut().zip(&transition[i]) {
                            *n += mass * a;
                        }
                    }
                    let total: f64 = next.iter().sum();
                    for n in &mut next {
                        *n /= total;
                    }
                    *belief = next;
                }
            }
            _ => unreachable!("filter state does not belong to this source"),
        }
        factor
    }

    /// `P(C_w)`: probability that the process starts with `w`.
    pub fn string_probability(&self, w: &[Bit]) -> Result<f64> {
        let mut state = self.filter()?;
        let mut prob = 1.0;
        for &b in w {
            prob *= self.filter_push(&mut state, b);
            if prob == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(prob)
    }

    /// `P(next = 1 | history)`.
    pub fn conditional_next_probability(&self, history: &[Bit]) -> Result<f64> {
        let mut state = self.filter()?;
        for &b in history {
            if self.filter_push(&mut state, b) == 0.0 {
                return Err(Error::ZeroProbabilityHistory(format_bits(history)));
            }
        }
        Ok(self.filter_p1(&state))
    }

    /// Draws `n` bits from the stationary process.
    pub fn sample_path(&self, n: usize, seed: u64) -> Result<PathSample> {
        self.require_ergodic()?;
        if n == 0 {
            return Err(Error::Config("path length must be at least 1".into()));
        }
        Ok(PathSample { bits: self.sample_bits(n, seed)?, seed, source_id: self.id() })
    }

    pub(crate) fn sample_bits(&self, n: usize, seed: u64) -> Result<Vec<Bit>> {
        self.require_ergodic()?;
        let mut rng = path_rng(seed);
        let mut bits = Vec::with_capacity(n);
        match &self.kind {
            SourceKind::HiddenMarkov { transition, emit1 } => {
                let pi = self.stationary()?;
                let mut hidden = draw_index(&mut rng, pi);
                for _ in 0..n {
                    bits.push(Bit::from(rng.gen::<f64>() < emit1[hidden]));
                    hidden = draw_index(&mut rng, &transition[hidden]);
                }
            }
            _ => {
                let mut state = self.filter()?;
                for _ in 0..n {
                    let b = Bit::from(rng.gen::<f64>() < self.filter_p1(&state));
                    self.filter_push(&mut state, b);
                    bits.push(b);
                }
            }
        }
        Ok(bits)
    }
}

/// Sufficient statistic of a history for predicting the next bit.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterState {
    Memoryless,
    /// Markov: number of bits seen and the last `min(len, k)` of them.
    Context { len: usize, ctx: usize },
    /// HMM: posterior over the hidden state of the next emission.
    Hidden { belief: Vec<f64> },
}

fn draw_index(rng: &mut PathRng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub(crate) fn context_string(c: usize, k: usize) -> String {
    (0..k).rev().map(|j| if (c >> j) & 1 == 1 { '1' } else { '0' }).collect()
}

fn chain_matrix(states: usize, successors: impl Fn(usize) -> Vec<(usize, f64)>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(states, states);
    for i in 0..states {
        for (j, p) in successors(i) {
            m[(i, j)] += p;
        }
    }
    m
}

fn reachable(matrix: &DMatrix<f64>, start: usize, forward: bool) -> Vec<bool> {
    let n = matrix.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let p = if forward { matrix[(u, v)] } else { matrix[(v, u)] };
            if p > 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Irreducibility by two-way reachability from state 0; period as the gcd of
/// `level(u) + 1 - level(v)` over edges inside the class of state 0.
fn analyze_chain(matrix: &DMatrix<f64>) -> (ErgodicityReport, Vec<usize>) {
    let n = matrix.nrows();
    let fwd = reachable(matrix, 0, true);
    let bwd = reachable(matrix, 0, false);
    let class: Vec<bool> = fwd.iter().zip(&bwd).map(|(a, b)| *a && *b).collect();
    let unreachable: Vec<usize> = (0..n).filter(|&i| !class[i]).collect();
    let irreducible = unreachable.is_empty();

    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if class[v] && matrix[(u, v)] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut period = 0usize;
    for u in (0..n).filter(|&u| class[u]) {
        for v in (0..n).filter(|&v| class[v] && matrix[(u, v)] > 0.0) {
            let diff = (level[u] + 1).abs_diff(level[v]);
            period = gcd(period, diff);
        }
    }
    let aperiodic = period == 1;
    (ErgodicityReport { irreducible, aperiodic, is_ergodic: irreducible && aperiodic }, unreachable)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solves `πᵀ M = πᵀ`, `Σ π = 1` for an irreducible chain.
fn stationary_law(matrix: &DMatrix<f64>) -> Vec<f64> {
    let n = matrix.nrows();
    let mut system = matrix.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let solution = system.lu().solve(&rhs).expect("irreducible chain has a unique stationary law");
    let mut pi: Vec<f64> = solution.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    pi
}
