//! Block maximum-likelihood reconstruction of the hidden chain.
//!
//! The observed path is cut into disjoint blocks of length `L`. In each block
//! the reconstruction `Z` is the candidate with at most one transition, placed
//! at least `K` symbols from either end, that maximizes
//! `Σ_i ln Q(u_i, y_i)`. Ties go to the lexicographically smallest block.
//!
//! Likelihoods are evaluated from the count table `n[a][j] = #{i : u_i = a,
//! y_i = j}` summed in a fixed `(a, j)` order, so the prefix-count search and a
//! direct per-candidate evaluation produce bit-identical scores.

use crate::entropy::ForwardFilter;
use crate::matrix::Matrix;
use crate::model::{argmax_first, check_distinguishing, Channel, HmmModel};
use crate::output::{fmt_float, fmt_opt, fmt_opt_float, CsvTable};
use crate::sampling::{sample_block_where, RngStream, Sampler, SamplingError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use thiserror::Error;

/// Smallest block count accepted by [`offset_tail_histogram`].
pub const MIN_HISTOGRAM_BLOCKS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructionError {
    #[error("incompatible block parameters: L = {l} must be at least 2K = {} (K ≥ 1)", 2 * .k)]
    IncompatibleParams { l: usize, k: usize },
    #[error("p = {0} outside (0, 1)")]
    InvalidP(f64),
    #[error("every candidate block has zero likelihood")]
    AllImpossible,
    #[error("Good1/Good2 refinement requested without a reconstruction")]
    MissingZ,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("blocks do not share a single a→b transition")]
    ShapeMismatch,
    #[error("path of length {len} is shorter than one block ({block})")]
    PathTooShort { len: usize, block: usize },
    #[error("channel is not statistically distinguishing")]
    NotDistinguishing,
    #[error("need at least {MIN_HISTOGRAM_BLOCKS} blocks, got {0}")]
    TooFewBlocks(usize),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Block length `L` and boundary margin `K`, with `K ≥ 1` and `L ≥ 2K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockParams {
    len: usize,
    margin: usize,
}

/// Explicit `L`/`K` values replacing the asymptotic schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockOverrides {
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub len: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<usize>,
}

// ceil() that ignores last-ulp noise, so ln(1/e^-3)^2 = 9.000000000000002 → 9
fn ceil_tolerant(x: f64) -> usize {
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(0.0) as usize
}

impl BlockParams {
    pub fn new(len: usize, margin: usize) -> Result<Self, ReconstructionError> {
        if margin == 0 || len < 2 * margin {
            return Err(ReconstructionError::IncompatibleParams { l: len, k: margin });
        }
        Ok(Self { len, margin })
    }

    /// `K = ⌈ln²(1/p)⌉`, `L = ⌈ln⁴(1/p)⌉` unless overridden.
    pub fn from_p(p: f64, overrides: BlockOverrides) -> Result<Self, ReconstructionError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ReconstructionError::InvalidP(p));
        }
        let log = (1.0 / p).ln();
        let margin = overrides
            .margin
            .unwrap_or_else(|| ceil_tolerant(log * log).max(1));
        let len = overrides
            .len
            .unwrap_or_else(|| ceil_tolerant(log.powi(4)).max(1));
        Self::new(len, margin)
    }

    /// `L`
    pub fn len(&self) -> usize {
        self.len
    }

    /// `K`
    pub fn margin(&self) -> usize {
        self.margin
    }
}

/// A block with at most one transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Block {
    Constant(u8),
    /// `first^cut second^(L-cut)` with `first ≠ second`.
    Step {
        first: u8,
        second: u8,
        cut: usize,
    },
}

impl Block {
    /// Recognizes blocks with at most one transition.
    pub fn parse(x: &[u8]) -> Option<Block> {
        let first = *x.first()?;
        let mut cut = None;
        for k in 1..x.len() {
            if x[k] != x[k - 1] {
                if cut.is_some() {
                    return None;
                }
                cut = Some(k);
            }
        }
        Some(match cut {
            None => Block::Constant(first),
            Some(cut) => Block::Step {
                first,
                second: x[cut],
                cut,
            },
        })
    }

    #[inline]
    pub fn at(&self, pos: usize) -> u8 {
        match *self {
            Block::Constant(a) => a,
            Block::Step { first, second, cut } => {
                if pos < cut {
                    first
                } else {
                    second
                }
            }
        }
    }

    pub fn materialize(&self, len: usize) -> Vec<u8> {
        (0..len).map(|i| self.at(i)).collect()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Block::Constant(_))
    }

    pub fn cut(&self) -> Option<usize> {
        match *self {
            Block::Constant(_) => None,
            Block::Step { cut, .. } => Some(cut),
        }
    }

    /// Lexicographic order of the two materialized blocks (equal lengths).
    /// Both are piecewise constant, so they first differ at position 0 or at
    /// one of the cuts.
    pub fn lex_cmp(&self, other: &Block) -> Ordering {
        let mut probes = [0, usize::MAX, usize::MAX];
        if let Some(c) = self.cut() {
            probes[1] = c;
        }
        if let Some(c) = other.cut() {
            probes[2] = c;
        }
        probes.sort_unstable();
        probes
            .iter()
            .filter(|&&p| p != usize::MAX)
            .map(|&p| self.at(p).cmp(&other.at(p)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// `B = {a^L} ∪ {a^i b^(L-i) : a ≠ b, K ≤ i ≤ L-K}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateSet {
    params: BlockParams,
    n_states: usize,
}

impl CandidateSet {
    pub fn new(params: BlockParams, n_states: usize) -> Self {
        Self { params, n_states }
    }

    pub fn params(&self) -> BlockParams {
        self.params
    }

    /// `|S| + |S|(|S|-1)(L-2K+1)`
    pub fn len(&self) -> usize {
        let s = self.n_states;
        s + s * (s - 1) * (self.params.len - 2 * self.params.margin + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.n_states == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Block> + '_ {
        let s = self.n_states;
        let (l, k) = (self.params.len, self.params.margin);
        let states = move || (0..s).map(|a| a as u8);
        let constants = states().map(Block::Constant);
        let steps = states().flat_map(move |first| {
            states()
                .filter(move |&b| b != first)
                .flat_map(move |second| {
                    (k..=l - k).map(move |cut| Block::Step { first, second, cut })
                })
        });
        constants.chain(steps)
    }

    pub fn contains(&self, block: &Block) -> bool {
        match *block {
            Block::Constant(a) => (a as usize) < self.n_states,
            Block::Step { first, second, cut } => {
                (first as usize) < self.n_states
                    && (second as usize) < self.n_states
                    && first != second
                    && cut >= self.params.margin
                    && cut <= self.params.len - self.params.margin
            }
        }
    }
}

/// Σ over `(state, counts)` rows in ascending state order of `n_aj · ln Q_aj`.
#[inline]
fn score_counts(log_q: &Matrix, rows: &[(usize, &[u32])]) -> f64 {
    let mut total = 0.0;
    for &(a, counts) in rows {
        for (j, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let l = log_q[(a, j)];
            if l == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += c as f64 * l;
        }
    }
    total
}

/// `L_u(y) = Σ_i ln Q(u_i, y_i)`, `-∞` if any term has probability zero.
pub fn block_log_likelihood(u: &[u8], y: &[u8], channel: &Channel) -> f64 {
    assert_eq!(u.len(), y.len(), "block and observation lengths differ");
    let (s, t) = (channel.n_inputs(), channel.n_outputs());
    let mut counts = vec![0u32; s * t];
    for (&a, &j) in u.iter().zip(y) {
        counts[a as usize * t + j as usize] += 1;
    }
    let log_q = channel.emission().map(f64::ln);
    let rows: Vec<(usize, &[u32])> = (0..s).map(|a| (a, &counts[a * t..(a + 1) * t])).collect();
    score_counts(&log_q, &rows)
}

/// Per-block search state: cumulative output counts `prefix[t][j]`.
struct BlockScorer<'a> {
    log_q: &'a Matrix,
    n_outputs: usize,
    prefix: Vec<u32>,
    tail: Vec<u32>,
}

impl<'a> BlockScorer<'a> {
    fn new(log_q: &'a Matrix, y: &[u8]) -> Self {
        let t = log_q.cols();
        let mut prefix = vec![0u32; (y.len() + 1) * t];
        for (i, &yi) in y.iter().enumerate() {
            let (head, rest) = prefix.split_at_mut((i + 1) * t);
            rest[..t].copy_from_slice(&head[i * t..]);
            rest[yi as usize] += 1;
        }
        Self {
            log_q,
            n_outputs: t,
            prefix,
            tail: vec![0; t],
        }
    }

    fn counts_before(&self, pos: usize) -> &[u32] {
        &self.prefix[pos * self.n_outputs..(pos + 1) * self.n_outputs]
    }

    fn score(&mut self, block: &Block, len: usize) -> f64 {
        let total = &self.prefix[len * self.n_outputs..];
        match *block {
            Block::Constant(a) => score_counts(self.log_q, &[(a as usize, total)]),
            Block::Step { first, second, cut } => {
                let head = &self.prefix[cut * self.n_outputs..(cut + 1) * self.n_outputs];
                for ((d, &tot), &h) in self.tail.iter_mut().zip(total).zip(head) {
                    *d = tot - h;
                }
                let (a, b) = (first as usize, second as usize);
                let head = self.counts_before(cut);
                if a < b {
                    score_counts(self.log_q, &[(a, head), (b, &self.tail)])
                } else {
                    score_counts(self.log_q, &[(b, &self.tail), (a, head)])
                }
            }
        }
    }
}

/// Maximum-likelihood candidate with its score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockEstimate {
    pub block: Block,
    pub log_likelihood: f64,
}

fn mle_with_log_q(
    y: &[u8],
    candidates: &CandidateSet,
    log_q: &Matrix,
) -> Result<BlockEstimate, ReconstructionError> {
    let len = candidates.params.len;
    if y.len() != len {
        return Err(ReconstructionError::LengthMismatch {
            left: y.len(),
            right: len,
        });
    }
    let mut scorer = BlockScorer::new(log_q, y);
    let mut best: Option<BlockEstimate> = None;
    for block in candidates.iter() {
        let score = scorer.score(&block, len);
        if score == f64::NEG_INFINITY {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                score > b.log_likelihood
                    || (score == b.log_likelihood && block.lex_cmp(&b.block) == Ordering::Less)
            }
        };
        if better {
            best = Some(BlockEstimate {
                block,
                log_likelihood: score,
            });
        }
    }
    best.ok_or(ReconstructionError::AllImpossible)
}

/// `Z = argmax_{u ∈ B} L_u(y)` in `O(|S|²·L·|T|)` from prefix counts.
pub fn mle_block(
    y: &[u8],
    candidates: &CandidateSet,
    channel: &Channel,
) -> Result<BlockEstimate, ReconstructionError> {
    mle_with_log_q(y, candidates, &channel.emission().map(f64::ln))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventClass {
    /// At least two transitions.
    Many,
    /// Exactly one transition, within `K` of an end.
    Boundary,
    /// At most one transition, away from the ends (unrefined).
    Good,
    /// Good with `δ(x, z) < K`.
    Good1,
    /// Good with `δ(x, z) ≥ K`.
    Good2,
}

impl EventClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Many => "many",
            Self::Boundary => "boundary",
            Self::Good => "good",
            Self::Good1 => "good1",
            Self::Good2 => "good2",
        }
    }
}

/// Whether [`classify_block`] splits `Good` by reconstruction distance.
#[derive(Debug, Clone, Copy)]
pub enum Resolution<'a> {
    Coarse,
    Refined(Option<&'a [u8]>),
}

/// Number of positions `k` with `x_k ≠ x_{k+1}`.
pub fn transition_count(x: &[u8]) -> usize {
    x.windows(2).filter(|w| w[0] != w[1]).count()
}

/// One transition at cut `i` is `Boundary` iff `i < K` or `i > L - K`.
pub fn classify_block(
    x: &[u8],
    params: BlockParams,
    resolution: Resolution<'_>,
) -> Result<EventClass, ReconstructionError> {
    if x.len() != params.len {
        return Err(ReconstructionError::LengthMismatch {
            left: x.len(),
            right: params.len,
        });
    }
    let coarse = match Block::parse(x) {
        None => EventClass::Many,
        Some(Block::Step { cut, .. })
            if cut < params.margin || cut > params.len - params.margin =>
        {
            EventClass::Boundary
        }
        Some(_) => EventClass::Good,
    };
    if coarse != EventClass::Good {
        return Ok(coarse);
    }
    match resolution {
        Resolution::Coarse => Ok(EventClass::Good),
        Resolution::Refined(None) => Err(ReconstructionError::MissingZ),
        Resolution::Refined(Some(z)) => Ok(if hamming(x, z)? < params.margin {
            EventClass::Good1
        } else {
            EventClass::Good2
        }),
    }
}

/// Number of positions where `u` and `v` differ.
pub fn hamming(u: &[u8], v: &[u8]) -> Result<usize, ReconstructionError> {
    if u.len() != v.len() {
        return Err(ReconstructionError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(u.iter().zip(v).filter(|(a, b)| a != b).count())
}

/// `N = j - i` for `x = a^i b^(L-i)`, `z = a^j b^(L-j)`.
pub fn offset_n(x: &[u8], z: &[u8]) -> Result<i64, ReconstructionError> {
    if x.len() != z.len() {
        return Err(ReconstructionError::LengthMismatch {
            left: x.len(),
            right: z.len(),
        });
    }
    match (Block::parse(x), Block::parse(z)) {
        (Some(bx), Some(bz)) => step_offset(&bx, &bz).ok_or(ReconstructionError::ShapeMismatch),
        _ => Err(ReconstructionError::ShapeMismatch),
    }
}

fn step_offset(x: &Block, z: &Block) -> Option<i64> {
    match (*x, *z) {
        (
            Block::Step {
                first: a1,
                second: b1,
                cut: i,
            },
            Block::Step {
                first: a2,
                second: b2,
                cut: j,
            },
        ) if a1 == a2 && b1 == b2 => Some(j as i64 - i as i64),
        _ => None,
    }
}

/// Per-block diagnostics. Fields needing the hidden path are `None` when it
/// was not supplied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRecord {
    pub index: usize,
    pub class: Option<EventClass>,
    pub transitions: Option<usize>,
    pub true_cut: Option<usize>,
    pub reconstructed: Block,
    pub offset: Option<i64>,
    pub delta: Option<usize>,
    pub loglik_z: f64,
    pub loglik_truth: Option<f64>,
    /// Every candidate had zero likelihood; `reconstructed` then minimizes
    /// the number of zero-probability positions instead.
    pub impossible: bool,
}

impl BlockRecord {
    pub fn reconstructed_cut(&self) -> Option<usize> {
        self.reconstructed.cut()
    }
}

/// Counts of blocks per event class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventTallies {
    pub blocks: u64,
    pub many: u64,
    pub boundary: u64,
    pub good1: u64,
    pub good2: u64,
    /// Good1 with `Z_0 = Z_{L-1}`.
    pub good1_constant: u64,
    /// Symbol errors on those blocks; zero whenever reconstruction is exact.
    pub good1_constant_errors: u64,
    /// Good1 with `Z_0 ≠ Z_{L-1}`.
    pub good1_transition: u64,
}

impl EventTallies {
    pub fn add(&mut self, record: &BlockRecord) {
        let Some(class) = record.class else {
            return;
        };
        self.blocks += 1;
        match class {
            EventClass::Many => self.many += 1,
            EventClass::Boundary => self.boundary += 1,
            EventClass::Good2 => self.good2 += 1,
            EventClass::Good1 => {
                self.good1 += 1;
                if record.reconstructed.is_constant() {
                    self.good1_constant += 1;
                    self.good1_constant_errors += record.delta.unwrap_or(0) as u64;
                } else {
                    self.good1_transition += 1;
                }
            }
            EventClass::Good => {}
        }
    }

    fn freq(&self, count: u64) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            count as f64 / self.blocks as f64
        }
    }

    /// `(E_m, E_b, E_g1, E_g2)` frequencies.
    pub fn frequencies(&self) -> [f64; 4] {
        [
            self.freq(self.many),
            self.freq(self.boundary),
            self.freq(self.good1),
            self.freq(self.good2),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Smoothing {
    pub params: BlockParams,
    /// Reconstruction of the first `blocks·L` symbols.
    pub reconstruction: Vec<u8>,
    pub blocks: Vec<BlockRecord>,
    /// Symbols in the trailing partial block, left unreconstructed.
    pub trailing: usize,
    pub tallies: Option<EventTallies>,
    pub symbol_errors: Option<u64>,
}

impl Smoothing {
    pub fn error_rate(&self) -> Option<f64> {
        self.symbol_errors
            .map(|e| e as f64 / self.reconstruction.len() as f64)
    }

    /// Offsets `N` on Good1 blocks whose reconstruction has a transition.
    pub fn good1_offsets(&self) -> impl Iterator<Item = i64> + '_ {
        self.blocks
            .iter()
            .filter(|r| r.class == Some(EventClass::Good1))
            .filter_map(|r| r.offset)
    }
}

/// `log Q` with `-∞` replaced by a penalty larger than any `L` finite
/// terms, so the maximizer first minimizes zero-probability positions.
fn penalized_log_q(log_q: &Matrix, len: usize) -> Matrix {
    let worst = log_q
        .as_slice()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::min);
    let penalty = worst * len as f64 - 1.0;
    log_q.map(|v| if v.is_finite() { v } else { penalty })
}

fn check_channel(model: &HmmModel) -> Result<(), ReconstructionError> {
    if check_distinguishing(model.channel()).distinguishing {
        Ok(())
    } else {
        Err(ReconstructionError::NotDistinguishing)
    }
}

/// Disjoint-block smoothing of a full observed path. When `x` is given,
/// blocks are classified and errors counted against it.
pub fn smooth_path(
    model: &HmmModel,
    y: &[u8],
    params: BlockParams,
    x: Option<&[u8]>,
) -> Result<Smoothing, ReconstructionError> {
    check_channel(model)?;
    let len = params.len;
    if y.len() < len {
        return Err(ReconstructionError::PathTooShort {
            len: y.len(),
            block: len,
        });
    }
    if let Some(x) = x {
        if x.len() != y.len() {
            return Err(ReconstructionError::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
    }
    let candidates = CandidateSet::new(params, model.n_states());
    let log_q = model.log_emission();
    let fallback_q = penalized_log_q(log_q, len);
    let n_blocks = y.len() / len;
    let results: Vec<(Vec<u8>, BlockRecord)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let range = b * len..(b + 1) * len;
            let yb = &y[range.clone()];
            let (est, impossible) = match mle_with_log_q(yb, &candidates, log_q) {
                Err(ReconstructionError::AllImpossible) => {
                    let mut est = mle_with_log_q(yb, &candidates, &fallback_q)?;
                    est.log_likelihood = f64::NEG_INFINITY;
                    (est, true)
                }
                other => (other?, false),
            };
            let z = est.block.materialize(len);
            let mut record = BlockRecord {
                index: b,
                class: None,
                transitions: None,
                true_cut: None,
                reconstructed: est.block,
                offset: None,
                delta: None,
                loglik_z: est.log_likelihood,
                loglik_truth: None,
                impossible,
            };
            if let Some(x) = x {
                let xb = &x[range];
                let parsed = Block::parse(xb);
                record.class = Some(classify_block(xb, params, Resolution::Refined(Some(&z)))?);
                record.transitions = Some(transition_count(xb));
                record.true_cut = parsed.and_then(|p| p.cut());
                record.offset = parsed.and_then(|p| step_offset(&p, &est.block));
                record.delta = Some(hamming(xb, &z)?);
                record.loglik_truth = Some(block_log_likelihood(xb, yb, model.channel()));
            }
            Ok((z, record))
        })
        .collect::<Result<_, ReconstructionError>>()?;

    let mut reconstruction = Vec::with_capacity(n_blocks * len);
    let mut blocks = Vec::with_capacity(n_blocks);
    let mut tallies = x.map(|_| EventTallies::default());
    let mut errors = x.map(|_| 0u64);
    for (z, record) in results {
        reconstruction.extend_from_slice(&z);
        if let Some(t) = tallies.as_mut() {
            t.add(&record);
        }
        if let (Some(e), Some(d)) = (errors.as_mut(), record.delta) {
            *e += d as u64;
        }
        blocks.push(record);
    }
    Ok(Smoothing {
        params,
        reconstruction,
        blocks,
        trailing: y.len() - n_blocks * len,
        tallies,
        symbol_errors: errors,
    })
}

pub const BLOCK_COLUMNS: [&str; 10] = [
    "block",
    "class",
    "transitions",
    "true_cut",
    "reconstructed_cut",
    "N",
    "delta",
    "loglik_z",
    "loglik_truth",
    "impossible",
];

/// One row per reconstructed block; hidden-path columns are empty when the
/// truth was not supplied.
pub fn block_table(smoothing: &Smoothing) -> CsvTable {
    let mut t = CsvTable::new(BLOCK_COLUMNS);
    for r in &smoothing.blocks {
        t.push(vec![
            r.index.to_string(),
            fmt_opt(r.class.map(|c| c.as_str())),
            fmt_opt(r.transitions),
            fmt_opt(r.true_cut),
            fmt_opt(r.reconstructed_cut()),
            fmt_opt(r.offset),
            fmt_opt(r.delta),
            fmt_float(r.loglik_z),
            fmt_opt_float(r.loglik_truth),
            r.impossible.to_string(),
        ]);
    }
    t
}

/// Causal reconstruction `x̂_n = argmax_i P(X_n = i | Y_1^n)`, ties to the
/// smallest index. After an impossible observation the filter restarts from
/// the stationary law.
pub fn filter_path(model: &HmmModel, y: &[u8]) -> Vec<u8> {
    let mut filter = ForwardFilter::new(model);
    let mut out = Vec::with_capacity(y.len());
    for &yi in y {
        filter.push(yi);
        if filter.is_impossible() {
            filter = ForwardFilter::new(model);
            filter.push(yi);
        }
        let guess = filter
            .state()
            .map(argmax_first)
            .unwrap_or_else(|| model.stationary().argmax());
        out.push(guess as u8);
    }
    out
}

/// Empirical law of the offset `N` and of `δ(X, Z)` on single-transition
/// Good blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OffsetHistogram {
    pub blocks: u64,
    pub good1: u64,
    pub good2: u64,
    pub offsets: BTreeMap<i64, u64>,
    pub deltas: BTreeMap<usize, u64>,
}

impl OffsetHistogram {
    pub fn add_offset(&mut self, n: i64) {
        *self.offsets.entry(n).or_default() += 1;
    }

    /// Counts of `|N| = k`.
    pub fn abs_counts(&self) -> BTreeMap<u64, u64> {
        let mut out = BTreeMap::new();
        for (&n, &c) in &self.offsets {
            *out.entry(n.unsigned_abs()).or_default() += c;
        }
        out
    }

    fn offset_total(&self) -> u64 {
        self.offsets.values().sum()
    }

    /// Plug-in entropy of `N`, nats.
    pub fn entropy_n(&self) -> f64 {
        empirical_entropy(self.offsets.values().copied())
    }

    pub fn mean_abs_n(&self) -> f64 {
        let total = self.offset_total();
        if total == 0 {
            return 0.0;
        }
        self.offsets
            .iter()
            .map(|(&n, &c)| n.unsigned_abs() as f64 * c as f64)
            .sum::<f64>()
            / total as f64
    }

    /// `(k, ln freq(|N| = k))` for bins holding at least `min_count` blocks.
    pub fn log_tail(&self, min_count: u64) -> Vec<(f64, f64)> {
        let total = self.offset_total() as f64;
        self.abs_counts()
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(k, c)| (k as f64, (c as f64 / total).ln()))
            .collect()
    }

    /// Least-squares slope of `ln freq(|N| = k)` against `k`; `None` with
    /// fewer than two qualifying bins.
    pub fn tail_slope(&self, min_count: u64) -> Option<f64> {
        least_squares_slope(&self.log_tail(min_count))
    }
}

/// `kind,value,count` rows: signed offsets `N`, then Hamming distances.
pub fn histogram_table(hist: &OffsetHistogram) -> CsvTable {
    let mut t = CsvTable::new(["kind", "value", "count"]);
    for (n, c) in &hist.offsets {
        t.push(vec!["N".into(), n.to_string(), c.to_string()]);
    }
    for (d, c) in &hist.deltas {
        t.push(vec!["delta".into(), d.to_string(), c.to_string()]);
    }
    t
}

pub fn empirical_entropy(counts: impl Iterator<Item = u64> + Clone) -> f64 {
    let total: u64 = counts.clone().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .map(|c| crate::model::neg_xlogx(c as f64 / total as f64))
        .sum()
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Samples `blocks` hidden blocks conditioned on a single transition in the
/// Good zone (block `b` on stream `(seed, b)`), observes and reconstructs
/// them, and tallies `N` on Good1 blocks and `δ(X, Z)` on all.
pub fn offset_tail_histogram(
    model: &HmmModel,
    params: BlockParams,
    blocks: usize,
    seed: u64,
    rejection_budget: u64,
) -> Result<OffsetHistogram, ReconstructionError> {
    if blocks < MIN_HISTOGRAM_BLOCKS {
        return Err(ReconstructionError::TooFewBlocks(blocks));
    }
    check_channel(model)?;
    let sampler = Sampler::new(model);
    let candidates = CandidateSet::new(params, model.n_states());
    let log_q = model.log_emission();
    let len = params.len;
    let per_block: Vec<(EventClass, usize, Option<i64>)> = (0..blocks as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b).rng();
            let x = sample_block_where(&sampler, len, &mut rng, rejection_budget, |x| {
                matches!(Block::parse(x), Some(Block::Step { cut, .. })
                    if cut >= params.margin && cut <= len - params.margin)
            })?;
            let y = sampler.observe(&x, &mut rng);
            let est = mle_with_log_q(&y, &candidates, log_q)?;
            let z = est.block.materialize(len);
            let class = classify_block(&x, params, Resolution::Refined(Some(&z)))?;
            let delta = hamming(&x, &z)?;
            let offset = Block::parse(&x).and_then(|bx| step_offset(&bx, &est.block));
            Ok((class, delta, offset))
        })
        .collect::<Result<_, ReconstructionError>>()?;

    let mut hist = OffsetHistogram::default();
    for (class, delta, offset) in per_block {
        hist.blocks += 1;
        *hist.deltas.entry(delta).or_default() += 1;
        match class {
            EventClass::Good1 => {
                hist.good1 += 1;
                if let Some(n) = offset {
                    hist.add_offset(n);
                }
            }
            _ => hist.good2 += 1,
        }
    }
    Ok(hist)
}
