//! Likelihoods and entropy-rate estimators for the observed process.
//!
//! `h(Y)` is estimated by Shannon–McMillan–Breiman averages of
//! `-(1/n) ln P(y)`, and `h(X|Y)` directly as `-(1/n) ln P(x|y)` on the same
//! sampled pairs, so the three per-path quantities satisfy
//! `marginal + conditional = joint` exactly.

use crate::model::{neg_xlogx, Distribution, HmmModel, ModelError};
use crate::sampling::{RngStream, Sampler};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default cap on bracket work, in forward-vector updates.
pub const DEFAULT_BRACKET_BUDGET: u64 = 1 << 24;
/// Smallest path length accepted by the Monte Carlo estimators.
pub const MIN_MC_LENGTH: usize = 1_000;

// Running products of normalizers are flushed into the log sum below this.
const FLUSH_BELOW: f64 = 1e-250;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error(
        "Monte Carlo budget too small: n = {n} (need ≥ {MIN_MC_LENGTH}), reps = {reps} (need ≥ 2)"
    )]
    InvalidBudget { n: usize, reps: usize },
    #[error("bracket depth must be at least 1")]
    ZeroDepth,
    #[error("bracket needs {required} terms, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("conditioning event has probability zero")]
    EmptyEvent,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Normalized forward recursion. After `push(y_0..y_k)`, `state()` is
/// `P(X_k = · | y_0..y_k)` and `log_likelihood()` is `ln P(y_0..y_k)`.
#[derive(Debug, Clone)]
pub struct ForwardFilter<'m> {
    model: &'m HmmModel,
    alpha: Vec<f64>,
    next: Vec<f64>,
    log_norm: f64,
    pending: f64,
    started: bool,
    impossible: bool,
}

impl<'m> ForwardFilter<'m> {
    pub fn new(model: &'m HmmModel) -> Self {
        let s = model.n_states();
        Self {
            model,
            alpha: vec![0.0; s],
            next: vec![0.0; s],
            log_norm: 0.0,
            pending: 1.0,
            started: false,
            impossible: false,
        }
    }

    /// Feeds one observation. Once an observation has probability zero the
    /// filter stays at `-∞`.
    #[inline]
    pub fn push(&mut self, y: u8) {
        if self.impossible {
            return;
        }
        let q = self.model.channel().emission();
        let y = y as usize;
        if !self.started {
            let pi = self.model.stationary().weights();
            for (i, n) in self.next.iter_mut().enumerate() {
                *n = pi[i] * q[(i, y)];
            }
            self.started = true;
        } else {
            let p = self.model.transition().entries();
            self.next.iter_mut().for_each(|n| *n = 0.0);
            for (i, &a) in self.alpha.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (n, &pij) in self.next.iter_mut().zip(p.row(i)) {
                    *n += a * pij;
                }
            }
            for (j, n) in self.next.iter_mut().enumerate() {
                *n *= q[(j, y)];
            }
        }
        let c: f64 = self.next.iter().sum();
        if c <= 0.0 {
            self.impossible = true;
            return;
        }
        let inv = 1.0 / c;
        for (a, &n) in self.alpha.iter_mut().zip(&self.next) {
            *a = n * inv;
        }
        self.pending *= c;
        if self.pending < FLUSH_BELOW {
            self.log_norm += self.pending.ln();
            self.pending = 1.0;
        }
    }

    pub fn log_likelihood(&self) -> f64 {
        if self.impossible {
            f64::NEG_INFINITY
        } else {
            self.log_norm + self.pending.ln()
        }
    }

    /// Filtered law of the current hidden state; `None` before the first
    /// observation or after an impossible one.
    pub fn state(&self) -> Option<&[f64]> {
        (self.started && !self.impossible).then_some(&self.alpha[..])
    }

    pub fn is_impossible(&self) -> bool {
        self.impossible
    }
}

/// `ln P(Y_0^{n-1} = y)` under the stationary start; `-∞` iff impossible.
pub fn forward_log_likelihood(model: &HmmModel, y: &[u8]) -> f64 {
    let mut f = ForwardFilter::new(model);
    for &yi in y {
        f.push(yi);
    }
    f.log_likelihood()
}

/// `ln P(X = x, Y = y)`.
pub fn joint_log_likelihood(model: &HmmModel, x: &[u8], y: &[u8]) -> f64 {
    assert_eq!(x.len(), y.len(), "hidden and observed lengths differ");
    let Some((&x0, _)) = x.split_first() else {
        return 0.0;
    };
    let lp = model.log_transition();
    let lq = model.log_emission();
    let mut total = model.stationary().weights()[x0 as usize].ln();
    let mut prev = x0 as usize;
    for (k, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let xi = xi as usize;
        if k > 0 {
            total += lp[(prev, xi)];
        }
        total += lq[(xi, yi as usize)];
        prev = xi;
    }
    total
}

/// `ln P(X = x | Y = y) = ln P(x, y) - ln P(y)`.
pub fn posterior_log_likelihood(model: &HmmModel, x: &[u8], y: &[u8]) -> f64 {
    PathLogProbs {
        joint: joint_log_likelihood(model, x, y),
        marginal: forward_log_likelihood(model, y),
    }
    .conditional()
}

/// Log-probabilities of one sampled `(x, y)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathLogProbs {
    /// `ln P(x, y)`
    pub joint: f64,
    /// `ln P(y)`
    pub marginal: f64,
}

impl PathLogProbs {
    /// `ln P(x | y)`, with `-∞` whenever `P(x, y) = 0`.
    pub fn conditional(&self) -> f64 {
        if self.joint == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.joint - self.marginal
        }
    }
}

pub fn path_log_probs(model: &HmmModel, x: &[u8], y: &[u8]) -> PathLogProbs {
    PathLogProbs {
        joint: joint_log_likelihood(model, x, y),
        marginal: forward_log_likelihood(model, y),
    }
}

/// Samples a path of length `n` on `stream` and scores it in the same pass,
/// without storing it. Identical to `path_log_probs` on `sample_path(model, n, stream)`.
pub fn sampled_log_probs(model: &HmmModel, n: usize, stream: RngStream) -> PathLogProbs {
    let sampler = Sampler::new(model);
    let mut rng = stream.rng();
    let lp = model.log_transition();
    let lq = model.log_emission();
    let log_pi = model.stationary().weights();
    let mut filter = ForwardFilter::new(model);
    let mut joint = 0.0;
    let mut prev: Option<usize> = None;
    sampler.walk(n, &mut rng, |x, y| {
        let xi = x as usize;
        joint += match prev {
            None => log_pi[xi].ln(),
            Some(pr) => lp[(pr, xi)],
        };
        joint += lq[(xi, y as usize)];
        prev = Some(xi);
        filter.push(y);
    });
    PathLogProbs {
        joint,
        marginal: filter.log_likelihood(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyKind {
    /// `h(Y)`
    Marginal,
    /// `h(X|Y)`
    Conditional,
    /// `h(X,Y)`
    Joint,
}

impl EntropyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Marginal => "marginal",
            Self::Conditional => "conditional",
            Self::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub reps: usize,
    pub kind: EntropyKind,
}

impl EntropyEstimate {
    fn from_rates(rates: &[f64], n: usize, kind: EntropyKind) -> Self {
        let reps = rates.len();
        let mean = rates.iter().sum::<f64>() / reps as f64;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        Self {
            mean,
            stderr: (var / reps as f64).sqrt(),
            n,
            reps,
            kind,
        }
    }
}

/// The three estimates computed on common sampled paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimates {
    pub marginal: EntropyEstimate,
    pub conditional: EntropyEstimate,
    pub joint: EntropyEstimate,
    pub replicates: Vec<PathLogProbs>,
}

impl EntropyEstimates {
    pub fn get(&self, kind: EntropyKind) -> &EntropyEstimate {
        match kind {
            EntropyKind::Marginal => &self.marginal,
            EntropyKind::Conditional => &self.conditional,
            EntropyKind::Joint => &self.joint,
        }
    }
}

/// Replicate `r` uses stream `(seed, r)`; results are reduced in replicate
/// order so the output does not depend on scheduling.
pub fn estimate_entropies(
    model: &HmmModel,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<EntropyEstimates, EntropyError> {
    if n < MIN_MC_LENGTH || reps < 2 {
        return Err(EntropyError::InvalidBudget { n, reps });
    }
    let replicates: Vec<PathLogProbs> = (0..reps as u64)
        .into_par_iter()
        .map(|r| sampled_log_probs(model, n, RngStream::new(seed, r)))
        .collect();
    let scale = -1.0 / n as f64;
    let rates = |f: fn(&PathLogProbs) -> f64| -> Vec<f64> {
        replicates.iter().map(|r| scale * f(r)).collect()
    };
    Ok(EntropyEstimates {
        marginal: EntropyEstimate::from_rates(&rates(|r| r.marginal), n, EntropyKind::Marginal),
        conditional: EntropyEstimate::from_rates(
            &rates(PathLogProbs::conditional),
            n,
            EntropyKind::Conditional,
        ),
        joint: EntropyEstimate::from_rates(&rates(|r| r.joint), n, EntropyKind::Joint),
        replicates,
    })
}

pub fn estimate_entropy_mc(
    model: &HmmModel,
    n: usize,
    reps: usize,
    seed: u64,
    kind: EntropyKind,
) -> Result<EntropyEstimate, EntropyError> {
    Ok(*estimate_entropies(model, n, reps, seed)?.get(kind))
}

/// `lower = H(Y_n | Y_1^{n-1}, X_1) ≤ h(Y) ≤ H(Y_n | Y_1^{n-1}) = upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Brackets for every depth `1..=depth`, from one depth-first enumeration of
/// the output prefixes per initial law.
pub fn exact_brackets(
    model: &HmmModel,
    depth: usize,
    budget: u64,
) -> Result<Vec<Bracket>, EntropyError> {
    if depth == 0 {
        return Err(EntropyError::ZeroDepth);
    }
    let s = model.n_states();
    let required = (model.n_outputs() as u128)
        .checked_pow(depth as u32)
        .and_then(|v| v.checked_mul(s as u128 + 1))
        .unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(EntropyError::BudgetExceeded { required, budget });
    }
    let enumerator = PrefixEnumerator { model, depth };
    let pi = model.stationary().weights();
    let upper = enumerator.conditional_entropies(pi);
    let mut lower = vec![0.0; depth];
    for (x, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut start = vec![0.0; s];
        start[x] = 1.0;
        for (l, h) in lower
            .iter_mut()
            .zip(enumerator.conditional_entropies(&start))
        {
            *l += w * h;
        }
    }
    Ok((0..depth)
        .map(|d| Bracket {
            n: d + 1,
            lower: lower[d],
            upper: upper[d],
        })
        .collect())
}

pub fn exact_bracket(model: &HmmModel, n: usize, budget: u64) -> Result<Bracket, EntropyError> {
    Ok(*exact_brackets(model, n, budget)?
        .last()
        .expect("depth ≥ 1 yields one bracket per depth"))
}

struct PrefixEnumerator<'m> {
    model: &'m HmmModel,
    depth: usize,
}

impl PrefixEnumerator<'_> {
    /// `H(Y_{d+1} | Y_1^d)` for `d = 0..depth` when `X_1 ~ start`.
    fn conditional_entropies(&self, start: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.depth];
        self.visit(start, 0, &mut acc);
        acc
    }

    /// `law[i] = P(y_1^d, X_{d+1} = i)` for the current prefix.
    fn visit(&self, law: &[f64], d: usize, acc: &mut [f64]) {
        let q = self.model.channel().emission();
        let p = self.model.transition().entries();
        let t = self.model.n_outputs();
        let mass: f64 = law.iter().sum();
        if mass <= 0.0 {
            return;
        }
        let joint: Vec<f64> = (0..t)
            .map(|j| law.iter().enumerate().map(|(i, &l)| l * q[(i, j)]).sum())
            .collect();
        // Σ_j q_j·(−ln(q_j / mass)) = Σ_j −q_j ln q_j + mass·ln mass
        acc[d] += joint.iter().map(|&v| neg_xlogx(v)).sum::<f64>() - neg_xlogx(mass);
        if d + 1 == self.depth {
            return;
        }
        for (j, &qj) in joint.iter().enumerate() {
            if qj <= 0.0 {
                continue;
            }
            let weighted: Vec<f64> = law
                .iter()
                .enumerate()
                .map(|(i, &l)| l * q[(i, j)])
                .collect();
            let next = p.left_mul(&weighted);
            self.visit(&next, d + 1, acc);
        }
    }
}

fn check_state(model: &HmmModel, i: usize) -> Result<(), ModelError> {
    if i >= model.n_states() {
        return Err(ModelError::IndexOutOfRange {
            index: i,
            size: model.n_states(),
        });
    }
    Ok(())
}

/// Unnormalized weights `P_ik P_ki' Q_kj` over the middle state `k`.
fn middle_weights(
    model: &HmmModel,
    i: usize,
    i2: usize,
    j: usize,
) -> Result<Vec<f64>, EntropyError> {
    check_state(model, i)?;
    check_state(model, i2)?;
    if j >= model.n_outputs() {
        return Err(ModelError::IndexOutOfRange {
            index: j,
            size: model.n_outputs(),
        }
        .into());
    }
    let p = model.transition();
    let q = model.channel();
    Ok((0..model.n_states())
        .map(|k| p.get(i, k) * p.get(k, i2) * q.get(k, j))
        .collect())
}

/// Law of `X_0` given `X_{-1} = i`, `X_1 = i'`, `Y_0 = j`.
pub fn posterior_middle_symbol(
    model: &HmmModel,
    i: usize,
    i2: usize,
    j: usize,
) -> Result<Distribution, EntropyError> {
    let w = middle_weights(model, i, i2, j)?;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(EntropyError::EmptyEvent);
    }
    Ok(Distribution::new(
        w.into_iter().map(|v| v / total).collect(),
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventAEntropy {
    /// `P(X_{-1} = i, X_1 = i', Y_0 = j)`
    pub probability: f64,
    /// Entropy of the middle-symbol posterior, nats.
    pub entropy: f64,
}

pub fn event_a_entropy(
    model: &HmmModel,
    i: usize,
    i2: usize,
    j: usize,
) -> Result<EventAEntropy, EntropyError> {
    let w = middle_weights(model, i, i2, j)?;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(EntropyError::EmptyEvent);
    }
    let posterior = posterior_middle_symbol(model, i, i2, j)?;
    Ok(EventAEntropy {
        probability: model.stationary().weights()[i] * total,
        entropy: posterior.entropy(),
    })
}
