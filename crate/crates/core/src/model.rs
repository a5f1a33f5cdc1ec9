//! Markov-chain family `P(p) = I + pA`, the memoryless channel `Q`, and the
//! entropy quantities that have closed forms.
//!
//! All entropies are in nats. The convention `0·ln 0 = 0` is applied in every
//! sum.

use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Tolerance for validating user-supplied rows (stochasticity, zero row sums).
pub const INPUT_TOL: f64 = 1e-12;
/// Tolerance for identities that hold exactly in exact arithmetic.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Sequences are stored one byte per symbol.
pub const MAX_ALPHABET: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("matrix is not square or has ragged rows")]
    NotSquare,
    #[error("matrix rows are ragged or empty")]
    Ragged,
    #[error("need at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("alphabet of size {0} exceeds the limit of {MAX_ALPHABET}")]
    AlphabetTooLarge(usize),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("generator sign constraint violated at ({row}, {col}): {value}")]
    BadSign { row: usize, col: usize, value: f64 },
    #[error("generator row {row} sums to {sum}, expected 0")]
    NonZeroRowSum { row: usize, sum: f64 },
    #[error("generator is reducible: off-diagonal support is not strongly connected")]
    Reducible,
    #[error("p = {p} outside (0, {p_max})")]
    POutOfRange { p: f64, p_max: f64 },
    #[error("row {row} is not a probability vector (entry {col} = {value}, sum = {sum})")]
    NotStochastic {
        row: usize,
        col: usize,
        value: f64,
        sum: f64,
    },
    #[error("channel has {channel} input rows but the chain has {states} states")]
    DimensionMismatch { channel: usize, states: usize },
    #[error("stationary system is singular")]
    SingularSystem,
    #[error("state index {index} out of range for {size} states")]
    IndexOutOfRange { index: usize, size: usize },
}

/// `-x ln x` with `0 ln 0 = 0`.
#[inline]
pub fn neg_xlogx(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector, in nats.
pub fn shannon_entropy(weights: &[f64]) -> f64 {
    weights.iter().copied().map(neg_xlogx).sum()
}

/// `KL(a ‖ b)` in nats; `+∞` when `a` charges a point `b` does not.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&ai, &bi)| {
            if ai <= 0.0 {
                0.0
            } else if bi <= 0.0 {
                f64::INFINITY
            } else {
                ai * (ai / bi).ln()
            }
        })
        .sum()
}

fn check_finite(m: &Matrix) -> Result<(), ModelError> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if !m[(i, j)].is_finite() {
                return Err(ModelError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_stochastic_rows(m: &Matrix) -> Result<(), ModelError> {
    for i in 0..m.rows() {
        let row = m.row(i);
        let sum: f64 = row.iter().sum();
        if let Some((j, &v)) = row.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(ModelError::NotStochastic {
                row: i,
                col: j,
                value: v,
                sum,
            });
        }
        if (sum - 1.0).abs() > INPUT_TOL {
            return Err(ModelError::NotStochastic {
                row: i,
                col: 0,
                value: row[0],
                sum,
            });
        }
    }
    Ok(())
}

/// Rate matrix `A`: negative diagonal, non-negative off-diagonal, zero row sums,
/// strongly connected off-diagonal support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GeneratorMatrix {
    rates: Matrix,
}

impl TryFrom<Vec<Vec<f64>>> for GeneratorMatrix {
    type Error = ModelError;

    fn try_from(raw: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        Self::new(&raw)
    }
}

impl From<GeneratorMatrix> for Vec<Vec<f64>> {
    fn from(g: GeneratorMatrix) -> Self {
        g.rates.to_rows()
    }
}

impl GeneratorMatrix {
    pub fn new(raw: &[Vec<f64>]) -> Result<Self, ModelError> {
        let rates = Matrix::from_rows(raw).ok_or(ModelError::NotSquare)?;
        let n = rates.rows();
        if rates.cols() != n {
            return Err(ModelError::NotSquare);
        }
        if n < 2 {
            return Err(ModelError::TooFewStates(n));
        }
        if n > MAX_ALPHABET {
            return Err(ModelError::AlphabetTooLarge(n));
        }
        check_finite(&rates)?;
        for i in 0..n {
            for j in 0..n {
                let v = rates[(i, j)];
                let ok = if i == j { v < 0.0 } else { v >= 0.0 };
                if !ok {
                    return Err(ModelError::BadSign {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        for i in 0..n {
            let sum: f64 = rates.row(i).iter().sum();
            if sum.abs() > INPUT_TOL {
                return Err(ModelError::NonZeroRowSum { row: i, sum });
            }
        }
        let gen = Self { rates };
        if !gen.strongly_connected() {
            return Err(ModelError::Reducible);
        }
        Ok(gen)
    }

    fn strongly_connected(&self) -> bool {
        let n = self.n_states();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    let w = if forward {
                        self.rates[(u, v)]
                    } else {
                        self.rates[(v, u)]
                    };
                    if v != u && w > 0.0 && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    pub fn n_states(&self) -> usize {
        self.rates.rows()
    }

    pub fn rates(&self) -> &Matrix {
        &self.rates
    }

    /// Exclusive upper bound on `p`: `1 / max_i |A_ii|`.
    pub fn p_max(&self) -> f64 {
        let max_diag = (0..self.n_states())
            .map(|i| self.rates[(i, i)].abs())
            .fold(0.0, f64::max);
        1.0 / max_diag
    }

    /// `P(p) = I + pA`.
    pub fn transition_matrix(&self, p: f64) -> Result<TransitionMatrix, ModelError> {
        let p_max = self.p_max();
        if !(p > 0.0 && p < p_max) {
            return Err(ModelError::POutOfRange { p, p_max });
        }
        let n = self.n_states();
        let mut entries = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                entries[(i, j)] += p * self.rates[(i, j)];
            }
        }
        Ok(TransitionMatrix { entries })
    }

    /// Solves `πA = 0`, `Σπ = 1` by replacing the last balance equation with
    /// the normalization row.
    pub fn stationary_distribution(&self) -> Result<Distribution, ModelError> {
        let n = self.n_states();
        let mut system = nalgebra::DMatrix::<f64>::zeros(n, n);
        for r in 0..n - 1 {
            for c in 0..n {
                // row r of Aᵀ
                system[(r, c)] = self.rates[(c, r)];
            }
        }
        for c in 0..n {
            system[(n - 1, c)] = 1.0;
        }
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        rhs[n - 1] = 1.0;
        let solution = system.lu().solve(&rhs).ok_or(ModelError::SingularSystem)?;
        if solution
            .iter()
            .any(|v| !v.is_finite() || *v < -IDENTITY_TOL)
        {
            return Err(ModelError::SingularSystem);
        }
        let clipped: Vec<f64> = solution.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        Ok(Distribution {
            weights: clipped.into_iter().map(|v| v / total).collect(),
        })
    }

    /// True when every diagonal rate is equal; transitions out of the current
    /// state then form an i.i.d. Bernoulli sequence with success `p·|A_ii|`.
    pub fn uniform_exit_rate(&self) -> Option<f64> {
        let r = self.rates[(0, 0)];
        (0..self.n_states())
            .all(|i| (self.rates[(i, i)] - r).abs() <= INPUT_TOL)
            .then_some(-r)
    }
}

/// Row-stochastic matrix. Used for `P(p)` and for the joint chain over `S×T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    entries: Matrix,
}

impl TransitionMatrix {
    pub fn new(raw: &[Vec<f64>]) -> Result<Self, ModelError> {
        let entries = Matrix::from_rows(raw).ok_or(ModelError::NotSquare)?;
        if entries.rows() != entries.cols() {
            return Err(ModelError::NotSquare);
        }
        check_finite(&entries)?;
        check_stochastic_rows(&entries)?;
        Ok(Self { entries })
    }

    pub fn n_states(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `h(P) = -Σ π_i P_ij ln P_ij`.
    pub fn entropy_rate(&self, stationary: &Distribution) -> f64 {
        markov_entropy(self, stationary)
    }
}

/// Memoryless channel with emission matrix `Q` (|S| rows, |T| columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Channel {
    emission: Matrix,
}

impl TryFrom<Vec<Vec<f64>>> for Channel {
    type Error = ModelError;

    fn try_from(raw: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        Self::new(&raw)
    }
}

impl From<Channel> for Vec<Vec<f64>> {
    fn from(c: Channel) -> Self {
        c.emission.to_rows()
    }
}

/// Outcome of [`check_distinguishing`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinguishingReport {
    pub distinguishing: bool,
    /// `(i, i', KL(Q_i ‖ Q_i'))` for every ordered pair `i ≠ i'`.
    pub divergences: Vec<(usize, usize, f64)>,
}

impl DistinguishingReport {
    pub fn min_divergence(&self) -> f64 {
        self.divergences
            .iter()
            .map(|d| d.2)
            .fold(f64::INFINITY, f64::min)
    }
}

impl Channel {
    pub fn new(raw: &[Vec<f64>]) -> Result<Self, ModelError> {
        let emission = Matrix::from_rows(raw).ok_or(ModelError::Ragged)?;
        if emission.rows() > MAX_ALPHABET {
            return Err(ModelError::AlphabetTooLarge(emission.rows()));
        }
        if emission.cols() > MAX_ALPHABET {
            return Err(ModelError::AlphabetTooLarge(emission.cols()));
        }
        check_finite(&emission)?;
        check_stochastic_rows(&emission)?;
        Ok(Self { emission })
    }

    /// Binary symmetric channel with crossover `eps`.
    pub fn binary_symmetric(eps: f64) -> Result<Self, ModelError> {
        Self::new(&[vec![1.0 - eps, eps], vec![eps, 1.0 - eps]])
    }

    /// Noiseless channel `Q = I`.
    pub fn identity(n: usize) -> Self {
        Self {
            emission: Matrix::identity(n),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.emission.rows()
    }

    pub fn n_outputs(&self) -> usize {
        self.emission.cols()
    }

    pub fn emission(&self) -> &Matrix {
        &self.emission
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.emission[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.emission.row(i)
    }

    /// Crossover probability when this is a 2×2 symmetric channel.
    pub fn bsc_crossover(&self) -> Option<f64> {
        if self.n_inputs() != 2 || self.n_outputs() != 2 {
            return None;
        }
        let eps = self.get(0, 1);
        ((self.get(1, 0) - eps).abs() <= INPUT_TOL).then_some(eps)
    }
}

/// `H_chan(i) = -Σ_j Q_ij ln Q_ij`.
pub fn channel_entropy(channel: &Channel, state: usize) -> Result<f64, ModelError> {
    if state >= channel.n_inputs() {
        return Err(ModelError::IndexOutOfRange {
            index: state,
            size: channel.n_inputs(),
        });
    }
    Ok(shannon_entropy(channel.row(state)))
}

/// Rows are pairwise distinct (beyond [`INPUT_TOL`]) iff every pairwise KL is
/// positive.
pub fn check_distinguishing(channel: &Channel) -> DistinguishingReport {
    let n = channel.n_inputs();
    let mut distinguishing = true;
    let mut divergences = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let (a, b) = (channel.row(i), channel.row(k));
            let distinct = a.iter().zip(b).any(|(x, y)| (x - y).abs() > INPUT_TOL);
            distinguishing &= distinct;
            let kl = if distinct { kl_divergence(a, b) } else { 0.0 };
            divergences.push((i, k, kl));
        }
    }
    DistinguishingReport {
        distinguishing,
        divergences,
    }
}

/// Probability vector over a finite set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        let sum: f64 = weights.iter().sum();
        if let Some((j, &v)) = weights
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(ModelError::NotStochastic {
                row: 0,
                col: j,
                value: v,
                sum,
            });
        }
        if weights.is_empty() || (sum - 1.0).abs() > INPUT_TOL {
            return Err(ModelError::NotStochastic {
                row: 0,
                col: 0,
                value: weights.first().copied().unwrap_or(0.0),
                sum,
            });
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.weights)
    }

    pub fn argmax(&self) -> usize {
        argmax_first(&self.weights)
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `h(P) = -Σ_{i,j} π_i P_ij ln P_ij`.
pub fn markov_entropy(transition: &TransitionMatrix, stationary: &Distribution) -> f64 {
    let n = transition.n_states();
    (0..n)
        .map(|i| stationary.weights[i] * shannon_entropy(transition.entries.row(i)))
        .sum()
}

/// Chain, channel and transition rate assembled, with exact entropies cached.
#[derive(Debug, Clone, Serialize)]
pub struct HmmModel {
    generator: GeneratorMatrix,
    p: f64,
    transition: TransitionMatrix,
    channel: Channel,
    stationary: Distribution,
    entropy_markov: f64,
    entropy_channel_avg: f64,
    #[serde(skip)]
    log_transition: Matrix,
    #[serde(skip)]
    log_emission: Matrix,
}

impl HmmModel {
    pub fn new(generator: GeneratorMatrix, p: f64, channel: Channel) -> Result<Self, ModelError> {
        if channel.n_inputs() != generator.n_states() {
            return Err(ModelError::DimensionMismatch {
                channel: channel.n_inputs(),
                states: generator.n_states(),
            });
        }
        let transition = generator.transition_matrix(p)?;
        let stationary = generator.stationary_distribution()?;
        let entropy_markov = markov_entropy(&transition, &stationary);
        let entropy_channel_avg = (0..channel.n_inputs())
            .map(|i| stationary.weights[i] * shannon_entropy(channel.row(i)))
            .sum();
        let log_transition = transition.entries.map(f64::ln);
        let log_emission = channel.emission.map(f64::ln);
        Ok(Self {
            generator,
            p,
            transition,
            channel,
            stationary,
            entropy_markov,
            entropy_channel_avg,
            log_transition,
            log_emission,
        })
    }

    /// Same chain and channel at another rate.
    pub fn with_p(&self, p: f64) -> Result<Self, ModelError> {
        Self::new(self.generator.clone(), p, self.channel.clone())
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn stationary(&self) -> &Distribution {
        &self.stationary
    }

    pub fn n_states(&self) -> usize {
        self.generator.n_states()
    }

    pub fn n_outputs(&self) -> usize {
        self.channel.n_outputs()
    }

    /// `h(P(p))`.
    pub fn entropy_markov(&self) -> f64 {
        self.entropy_markov
    }

    /// `Σ_i π_i H_chan(i)`.
    pub fn entropy_channel_avg(&self) -> f64 {
        self.entropy_channel_avg
    }

    /// `h(X,Y) = h(P) + Σ_i π_i H_chan(i)`.
    pub fn entropy_joint(&self) -> f64 {
        self.entropy_markov + self.entropy_channel_avg
    }

    pub fn log_transition(&self) -> &Matrix {
        &self.log_transition
    }

    pub fn log_emission(&self) -> &Matrix {
        &self.log_emission
    }

    /// Crossover and flip probability when the model is the symmetric binary
    /// chain observed through a binary symmetric channel.
    pub fn binary_symmetric_params(&self) -> Option<(f64, f64)> {
        if self.n_states() != 2 {
            return None;
        }
        let flip = self.transition.get(0, 1);
        if (self.transition.get(1, 0) - flip).abs() > INPUT_TOL {
            return None;
        }
        let eps = self.channel.bsc_crossover()?;
        Some((flip, eps))
    }

    /// Short stable hash of `(A, p, Q)`.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_states() as u64).to_le_bytes());
        hasher.update((self.n_outputs() as u64).to_le_bytes());
        for v in self.generator.rates.as_slice() {
            hasher.update(v.to_le_bytes());
        }
        hasher.update(self.p.to_le_bytes());
        for v in self.channel.emission.as_slice() {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

/// Joint chain `(X_n, Y_n)` on `S×T`, indexed `(i, j) ↦ i·|T| + j`.
/// `P̄_{(i,j),(i',j')} = P_ii' Q_i'j'`, `π̄_{(i,j)} = π_i Q_ij`.
pub fn joint_chain(model: &HmmModel) -> (TransitionMatrix, Distribution) {
    let (s, t) = (model.n_states(), model.n_outputs());
    let mut entries = Matrix::zeros(s * t, s * t);
    let mut weights = vec![0.0; s * t];
    for i in 0..s {
        for j in 0..t {
            let row = i * t + j;
            weights[row] = model.stationary.weights[i] * model.channel.get(i, j);
            for i2 in 0..s {
                for j2 in 0..t {
                    entries[(row, i2 * t + j2)] =
                        model.transition.get(i, i2) * model.channel.get(i2, j2);
                }
            }
        }
    }
    (TransitionMatrix { entries }, Distribution { weights })
}
