//! Sweeps over `p` that measure the conditional-entropy correction, the
//! reconstruction error and the block event frequencies.

use crate::entropy::{estimate_entropies, EntropyError, EntropyEstimate};
use crate::model::{neg_xlogx, Channel, GeneratorMatrix, HmmModel, ModelError};
use crate::output::{fmt_float, fmt_opt_float, CsvTable};
use crate::reconstruction::{
    classify_block, empirical_entropy, filter_path, hamming, mle_block, smooth_path,
    BlockOverrides, BlockParams, CandidateSet, EventClass, ReconstructionError, Resolution,
};
use crate::sampling::{derive_seed, sample_path, RngStream, Sampler};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Largest accepted `C_hat / c_hat` over a sweep.
pub const SPREAD_BUDGET: f64 = 5.0;
/// An estimate is resolved when it exceeds this many standard errors.
pub const RESOLUTION_SIGMAS: f64 = 3.0;
pub const MIN_DECODE_LENGTH: usize = 100_000;
pub const MIN_EVENT_BLOCKS: usize = 1_000;

// Stream labels mixed into the master seed.
const LABEL_ENTROPY: u64 = 1;
const LABEL_DECODE: u64 = 2;
const LABEL_EVENTS: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("p list needs at least 3 values, got {0}")]
    TooFewPValues(usize),
    #[error("p list spans a factor of {0:.3}; at least one decade is required")]
    NarrowPRange(f64),
    #[error("need at least 3 sweep rows, got {0}")]
    TooFewRows(usize),
    #[error("estimate at p = {p} is not resolved: {estimate} ≤ {RESOLUTION_SIGMAS}·{stderr}; increase n")]
    InsufficientResolution { p: f64, estimate: f64, stderr: f64 },
    #[error("decode length {0} below {MIN_DECODE_LENGTH}")]
    DecodeTooShort(usize),
    #[error("{0} blocks per p is below {MIN_EVENT_BLOCKS}")]
    TooFewBlocks(usize),
    #[error("bounds need 0 < p < 1 and 0 < ε < 1/2, got p = {p}, ε = {eps}")]
    OutOfDomain { p: f64, eps: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
}

/// `g(q) = -q ln q - (1-q) ln(1-q)`.
pub fn binary_entropy(q: f64) -> f64 {
    neg_xlogx(q) + neg_xlogx(1.0 - q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NowBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `g(ε) - (1-2ε)² p ln p / (1-ε) ≤ h(Y) ≤ g(p) + g(ε)` for the symmetric
/// binary chain with flip probability `p` seen through a BSC(ε).
pub fn now_bounds(p: f64, eps: f64) -> Result<NowBounds, ExperimentError> {
    if !(p > 0.0 && p < 1.0 && eps > 0.0 && eps < 0.5) {
        return Err(ExperimentError::OutOfDomain { p, eps });
    }
    Ok(NowBounds {
        lower: binary_entropy(eps) - (1.0 - 2.0 * eps).powi(2) * p * p.ln() / (1.0 - eps),
        upper: binary_entropy(p) + binary_entropy(eps),
    })
}

/// How block parameters are chosen at each `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockPolicy {
    /// `K = ⌈ln²(1/p)⌉`, `L = ⌈ln⁴(1/p)⌉`.
    Asymptotic,
    /// `L = ⌊0.5/p⌋` so that `pL ≤ 0.5`; `K = min(⌈ln²(1/p)⌉, ⌊L/4⌋)`.
    Desk,
    /// `K = ⌈ln(1/p)⌉`, `L = ⌈2·(K²/p)^(1/3)⌉`: balances boundary losses
    /// (`≈ pK²/L` per symbol) against multi-transition losses (`≈ p²L²`).
    Balanced,
    /// The same `(L, K)` at every `p`; missing values fall back to `Asymptotic`.
    Fixed(BlockOverrides),
}

impl BlockPolicy {
    pub fn params(&self, p: f64) -> Result<BlockParams, ReconstructionError> {
        match *self {
            BlockPolicy::Asymptotic => BlockParams::from_p(p, BlockOverrides::default()),
            BlockPolicy::Fixed(o) => BlockParams::from_p(p, o),
            BlockPolicy::Desk => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(ReconstructionError::InvalidP(p));
                }
                let len = (0.5 / p).floor() as usize;
                let log = (1.0 / p).ln();
                let margin = ((log * log).ceil() as usize).min(len / 4).max(1);
                BlockParams::new(len, margin)
            }
            BlockPolicy::Balanced => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(ReconstructionError::InvalidP(p));
                }
                let margin = ((1.0 / p).ln().ceil() as usize).max(1);
                let len = (2.0 * ((margin * margin) as f64 / p).cbrt()).ceil() as usize;
                BlockParams::new(len.max(2 * margin), margin)
            }
        }
    }
}

/// Generator and channel; the model at each `p` is `HmmModel::new(A, p, Q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub generator: GeneratorMatrix,
    pub channel: Channel,
}

impl ModelFamily {
    pub fn new(generator: GeneratorMatrix, channel: Channel) -> Self {
        Self { generator, channel }
    }

    pub fn at(&self, p: f64) -> Result<HmmModel, ModelError> {
        HmmModel::new(self.generator.clone(), p, self.channel.clone())
    }
}

/// Per-`p` budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepBudget {
    /// Path length per entropy replicate.
    pub n_entropy: usize,
    pub reps: usize,
    /// Path length for the decoding comparison.
    pub n_decode: usize,
    pub policy: BlockPolicy,
}

impl Default for SweepBudget {
    fn default() -> Self {
        Self {
            n_entropy: 10_000_000,
            reps: 10,
            n_decode: 1_000_000,
            policy: BlockPolicy::Balanced,
        }
    }
}

fn validate_p_list(p_list: &[f64]) -> Result<(), ExperimentError> {
    if p_list.len() < 3 {
        return Err(ExperimentError::TooFewPValues(p_list.len()));
    }
    let lo = p_list.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p_list.iter().copied().fold(0.0, f64::max);
    // 1e-9 slack so that {1e-3, …, 1e-2} counts as a full decade
    if hi / lo < 10.0 * (1.0 - 1e-9) {
        return Err(ExperimentError::NarrowPRange(hi / lo));
    }
    Ok(())
}

/// One `p` value's estimates, bounds and decoding statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub n: usize,
    pub reps: usize,
    #[serde(rename = "L")]
    pub block_len: usize,
    #[serde(rename = "K")]
    pub block_margin: usize,
    pub h_markov: f64,
    pub h_chan_avg: f64,
    pub h_joint: f64,
    pub h_y_est: f64,
    pub h_y_stderr: f64,
    pub h_xy_cond_est: f64,
    pub h_xy_cond_stderr: f64,
    /// `h_markov + h_chan_avg - h_y_est`
    pub defect: f64,
    pub smoothing_error_rate: f64,
    pub filtering_error_rate: f64,
    pub freq_em: f64,
    pub freq_eb: f64,
    pub freq_eg1: f64,
    pub freq_eg2: f64,
    pub mean_abs_n: f64,
    pub h_n_empirical: f64,
    /// Present for the symmetric binary chain through a BSC only.
    pub now: Option<NowBounds>,
    /// Good1 blocks with constant reconstruction that nonetheless had errors.
    pub good1_constant_errors: u64,
}

pub const SWEEP_COLUMNS: [&str; 22] = [
    "p",
    "n",
    "reps",
    "L",
    "K",
    "h_markov",
    "h_chan_avg",
    "h_joint",
    "h_y_est",
    "h_y_stderr",
    "h_xy_cond_est",
    "h_xy_cond_stderr",
    "defect",
    "smoothing_error_rate",
    "filtering_error_rate",
    "freq_em",
    "freq_eb",
    "freq_eg1",
    "freq_eg2",
    "mean_abs_n",
    "h_n_empirical",
    "good1_constant_errors",
];

impl SweepRow {
    /// `sqrt(σ_Y² + σ_{X|Y}²)`
    pub fn combined_stderr(&self) -> f64 {
        self.h_y_stderr.hypot(self.h_xy_cond_stderr)
    }

    /// `|D(p) - ĥ(X|Y)| ≤ 3·combined stderr`.
    pub fn closure_holds(&self) -> bool {
        (self.defect - self.h_xy_cond_est).abs() <= 3.0 * self.combined_stderr()
    }

    pub fn frequency_sum(&self) -> f64 {
        self.freq_em + self.freq_eb + self.freq_eg1 + self.freq_eg2
    }

    fn csv_record(&self, with_now: bool) -> Vec<String> {
        let mut r = vec![
            fmt_float(self.p),
            self.n.to_string(),
            self.reps.to_string(),
            self.block_len.to_string(),
            self.block_margin.to_string(),
            fmt_float(self.h_markov),
            fmt_float(self.h_chan_avg),
            fmt_float(self.h_joint),
            fmt_float(self.h_y_est),
            fmt_float(self.h_y_stderr),
            fmt_float(self.h_xy_cond_est),
            fmt_float(self.h_xy_cond_stderr),
            fmt_float(self.defect),
            fmt_float(self.smoothing_error_rate),
            fmt_float(self.filtering_error_rate),
            fmt_float(self.freq_em),
            fmt_float(self.freq_eb),
            fmt_float(self.freq_eg1),
            fmt_float(self.freq_eg2),
            fmt_float(self.mean_abs_n),
            fmt_float(self.h_n_empirical),
            self.good1_constant_errors.to_string(),
        ];
        if with_now {
            r.push(fmt_opt_float(self.now.map(|b| b.lower)));
            r.push(fmt_opt_float(self.now.map(|b| b.upper)));
        }
        r
    }
}

/// Sweep table; `now_lower`/`now_upper` columns appear only when every row
/// has them.
pub fn sweep_table(rows: &[SweepRow]) -> CsvTable {
    let with_now = !rows.is_empty() && rows.iter().all(|r| r.now.is_some());
    let mut header: Vec<&str> = SWEEP_COLUMNS.to_vec();
    if with_now {
        header.extend(["now_lower", "now_upper"]);
    }
    let mut t = CsvTable::new(header);
    for r in rows {
        t.push(r.csv_record(with_now));
    }
    t
}

/// Smoothing and filtering run on one sampled path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodingRun {
    pub params: BlockParams,
    /// Symbols covered by full blocks; both error counts are over these.
    pub symbols: usize,
    pub smoothing_errors: u64,
    pub filtering_errors: u64,
    pub freqs: [f64; 4],
    pub good1_constant_errors: u64,
    pub offsets: BTreeMap<i64, u64>,
}

impl DecodingRun {
    pub fn smoothing_rate(&self) -> f64 {
        self.smoothing_errors as f64 / self.symbols as f64
    }

    pub fn filtering_rate(&self) -> f64 {
        self.filtering_errors as f64 / self.symbols as f64
    }

    pub fn mean_abs_n(&self) -> f64 {
        let total: u64 = self.offsets.values().sum();
        if total == 0 {
            return 0.0;
        }
        self.offsets
            .iter()
            .map(|(n, c)| n.unsigned_abs() as f64 * *c as f64)
            .sum::<f64>()
            / total as f64
    }

    pub fn entropy_n(&self) -> f64 {
        empirical_entropy(self.offsets.values().copied())
    }
}

/// Samples one path of length `n` on `stream` and decodes it both ways.
pub fn decode_paired(
    model: &HmmModel,
    params: BlockParams,
    n: usize,
    stream: RngStream,
) -> Result<DecodingRun, ExperimentError> {
    let path = sample_path(model, n, stream);
    let smoothing = smooth_path(model, &path.y, params, Some(&path.x))?;
    let symbols = smoothing.reconstruction.len();
    let filtered = filter_path(model, &path.y[..symbols]);
    let filtering_errors = hamming(&filtered, &path.x[..symbols])? as u64;
    let tallies = smoothing.tallies.expect("hidden path supplied");
    let mut offsets = BTreeMap::new();
    for n in smoothing.good1_offsets() {
        *offsets.entry(n).or_default() += 1;
    }
    Ok(DecodingRun {
        params,
        symbols,
        smoothing_errors: smoothing.symbol_errors.expect("hidden path supplied"),
        filtering_errors,
        freqs: tallies.frequencies(),
        good1_constant_errors: tallies.good1_constant_errors,
        offsets,
    })
}

fn now_for(model: &HmmModel) -> Option<NowBounds> {
    let (flip, eps) = model.binary_symmetric_params()?;
    now_bounds(flip, eps).ok()
}

pub fn sweep_row(
    family: &ModelFamily,
    p: f64,
    budget: &SweepBudget,
    seed: u64,
) -> Result<SweepRow, ExperimentError> {
    let model = family.at(p)?;
    let params = budget.policy.params(p)?;
    let est = estimate_entropies(
        &model,
        budget.n_entropy,
        budget.reps,
        derive_seed(seed, &[p.to_bits(), LABEL_ENTROPY]),
    )?;
    let decode = decode_paired(
        &model,
        params,
        budget.n_decode,
        RngStream::new(derive_seed(seed, &[p.to_bits(), LABEL_DECODE]), 0),
    )?;
    let EntropyEstimate {
        mean: h_y,
        stderr: h_y_se,
        ..
    } = est.marginal;
    let [freq_em, freq_eb, freq_eg1, freq_eg2] = decode.freqs;
    Ok(SweepRow {
        p,
        n: budget.n_entropy,
        reps: budget.reps,
        block_len: params.len(),
        block_margin: params.margin(),
        h_markov: model.entropy_markov(),
        h_chan_avg: model.entropy_channel_avg(),
        h_joint: model.entropy_joint(),
        h_y_est: h_y,
        h_y_stderr: h_y_se,
        h_xy_cond_est: est.conditional.mean,
        h_xy_cond_stderr: est.conditional.stderr,
        defect: model.entropy_markov() + model.entropy_channel_avg() - h_y,
        smoothing_error_rate: decode.smoothing_rate(),
        filtering_error_rate: decode.filtering_rate(),
        freq_em,
        freq_eb,
        freq_eg1,
        freq_eg2,
        mean_abs_n: decode.mean_abs_n(),
        h_n_empirical: decode.entropy_n(),
        now: now_for(&model),
        good1_constant_errors: decode.good1_constant_errors,
    })
}

/// One row per `p`, each on streams derived from `(seed, p)`.
pub fn run_sweep(
    family: &ModelFamily,
    p_list: &[f64],
    budget: &SweepBudget,
    seed: u64,
) -> Result<Vec<SweepRow>, ExperimentError> {
    validate_p_list(p_list)?;
    for &p in p_list {
        family.at(p)?;
        budget.policy.params(p)?;
    }
    p_list
        .iter()
        .map(|&p| sweep_row(family, p, budget, seed))
        .collect()
}

/// `ĥ(X|Y)/p` across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub quantity: String,
    pub p_values: Vec<f64>,
    pub ratios: Vec<f64>,
    pub c_hat: f64,
    #[serde(rename = "C_hat")]
    pub big_c_hat: f64,
    pub spread: f64,
    pub pass: bool,
}

impl FitReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: c_hat = {:.6}, C_hat = {:.6}, spread = {:.3} (budget {SPREAD_BUDGET})",
            if self.pass { "PASS" } else { "FAIL" },
            self.quantity,
            self.c_hat,
            self.big_c_hat,
            self.spread,
        )
    }
}

/// Requires every `ĥ(X|Y)` to exceed `3·stderr`; passes when all ratios are
/// positive and the spread is under [`SPREAD_BUDGET`].
pub fn scaling_fit(rows: &[SweepRow]) -> Result<FitReport, ExperimentError> {
    if rows.len() < 3 {
        return Err(ExperimentError::TooFewRows(rows.len()));
    }
    for r in rows {
        if !(r.h_xy_cond_est > RESOLUTION_SIGMAS * r.h_xy_cond_stderr) {
            return Err(ExperimentError::InsufficientResolution {
                p: r.p,
                estimate: r.h_xy_cond_est,
                stderr: r.h_xy_cond_stderr,
            });
        }
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.h_xy_cond_est / r.p).collect();
    let c_hat = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let big_c_hat = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = big_c_hat / c_hat;
    Ok(FitReport {
        quantity: "h_xy_cond".to_owned(),
        p_values: rows.iter().map(|r| r.p).collect(),
        pass: c_hat > 0.0 && spread.is_finite() && spread < SPREAD_BUDGET,
        ratios,
        c_hat,
        big_c_hat,
        spread,
    })
}

/// Exact block-event probabilities for a stationary block of length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactBlockEvents {
    pub no_transition: f64,
    pub many: f64,
    pub boundary: f64,
    /// Exactly one transition with cut in `[K, L-K]`.
    pub good_step: f64,
}

/// `P(no transition) = Σ_a π_a P_aa^(L-1)`, and one transition at cut `i`
/// has probability `Σ_{a≠b} π_a P_aa^(i-1) P_ab P_bb^(L-1-i)`.
pub fn exact_block_events(model: &HmmModel, params: BlockParams) -> ExactBlockEvents {
    let pi = model.stationary().weights();
    let p = model.transition();
    let s = model.n_states();
    let len = params.len();
    let no_transition: f64 = (0..s)
        .map(|a| pi[a] * p.get(a, a).powi(len as i32 - 1))
        .sum();
    let mut boundary = 0.0;
    let mut good_step = 0.0;
    for cut in 1..len {
        let mut at_cut = 0.0;
        for a in 0..s {
            for b in (0..s).filter(|&b| b != a) {
                at_cut += pi[a]
                    * p.get(a, a).powi(cut as i32 - 1)
                    * p.get(a, b)
                    * p.get(b, b).powi((len - 1 - cut) as i32);
            }
        }
        if cut < params.margin() || cut > len - params.margin() {
            boundary += at_cut;
        } else {
            good_step += at_cut;
        }
    }
    ExactBlockEvents {
        no_transition,
        many: 1.0 - no_transition - boundary - good_step,
        boundary,
        good_step,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventScalingRow {
    pub p: f64,
    pub block_len: usize,
    pub block_margin: usize,
    pub blocks: u64,
    pub freq_em: f64,
    pub exact_em: f64,
    pub freq_eb: f64,
    pub exact_eb: f64,
    pub count_eg2: u64,
    pub freq_eg2: f64,
    /// Empirical `P(E_g1 ∩ {Z_0 ≠ Z_{L-1}})`.
    pub freq_eg1_transition: f64,
    /// Its comparator: exact probability of a single Good-zone transition.
    pub exact_good_step: f64,
}

impl EventScalingRow {
    /// Binomial standard deviation of a frequency over `blocks` trials.
    pub fn sigma(&self, prob: f64) -> f64 {
        (prob * (1.0 - prob) / self.blocks as f64).sqrt()
    }

    /// `|freq - exact| ≤ k·σ` for both `E_m` and `E_b`.
    pub fn within_sigmas(&self, k: f64) -> bool {
        (self.freq_em - self.exact_em).abs() <= k * self.sigma(self.exact_em)
            && (self.freq_eb - self.exact_eb).abs() <= k * self.sigma(self.exact_eb)
    }
}

pub const EVENT_COLUMNS: [&str; 12] = [
    "p",
    "L",
    "K",
    "blocks",
    "freq_em",
    "exact_em",
    "freq_eb",
    "exact_eb",
    "count_eg2",
    "freq_eg2",
    "freq_eg1_transition",
    "exact_good_step",
];

pub fn event_table(rows: &[EventScalingRow]) -> CsvTable {
    let mut t = CsvTable::new(EVENT_COLUMNS);
    for r in rows {
        t.push(vec![
            fmt_float(r.p),
            r.block_len.to_string(),
            r.block_margin.to_string(),
            r.blocks.to_string(),
            fmt_float(r.freq_em),
            fmt_float(r.exact_em),
            fmt_float(r.freq_eb),
            fmt_float(r.exact_eb),
            r.count_eg2.to_string(),
            fmt_float(r.freq_eg2),
            fmt_float(r.freq_eg1_transition),
            fmt_float(r.exact_good_step),
        ]);
    }
    t
}

/// Event frequencies over `blocks` independent stationary blocks per `p`
/// (block `b` on stream `(seed', b)`), next to their exact probabilities.
pub fn event_scaling_report(
    family: &ModelFamily,
    p_list: &[f64],
    policy: BlockPolicy,
    blocks: usize,
    seed: u64,
) -> Result<Vec<EventScalingRow>, ExperimentError> {
    if blocks < MIN_EVENT_BLOCKS {
        return Err(ExperimentError::TooFewBlocks(blocks));
    }
    p_list
        .iter()
        .map(|&p| {
            let model = family.at(p)?;
            let params = policy.params(p)?;
            let sampler = Sampler::new(&model);
            let candidates = CandidateSet::new(params, model.n_states());
            let row_seed = derive_seed(seed, &[p.to_bits(), LABEL_EVENTS]);
            let classes: Vec<(EventClass, bool)> = (0..blocks as u64)
                .into_par_iter()
                .map(|b| {
                    let mut rng = RngStream::new(row_seed, b).rng();
                    let x = sampler.hidden_block(params.len(), &mut rng);
                    let y = sampler.observe(&x, &mut rng);
                    let z = mle_block(&y, &candidates, model.channel())?;
                    let zv = z.block.materialize(params.len());
                    let class = classify_block(&x, params, Resolution::Refined(Some(&zv)))?;
                    Ok((class, !z.block.is_constant()))
                })
                .collect::<Result<_, ReconstructionError>>()?;
            let count = |pred: &dyn Fn(&(EventClass, bool)) -> bool| {
                classes.iter().filter(|c| pred(c)).count() as u64
            };
            let n = blocks as f64;
            let many = count(&|c| c.0 == EventClass::Many);
            let boundary = count(&|c| c.0 == EventClass::Boundary);
            let good2 = count(&|c| c.0 == EventClass::Good2);
            let g1_step = count(&|c| c.0 == EventClass::Good1 && c.1);
            let exact = exact_block_events(&model, params);
            Ok(EventScalingRow {
                p,
                block_len: params.len(),
                block_margin: params.margin(),
                blocks: blocks as u64,
                freq_em: many as f64 / n,
                exact_em: exact.many,
                freq_eb: boundary as f64 / n,
                exact_eb: exact.boundary,
                count_eg2: good2,
                freq_eg2: good2 as f64 / n,
                freq_eg1_transition: g1_step as f64 / n,
                exact_good_step: exact.good_step,
            })
        })
        .collect()
}

/// Smoothing and filtering error rates on common paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodingRow {
    pub p: f64,
    pub block_len: usize,
    pub block_margin: usize,
    pub n: usize,
    pub smoothing_error_rate: f64,
    pub filtering_error_rate: f64,
    /// `filtering / smoothing`; `None` when smoothing made no errors.
    pub ratio: Option<f64>,
}

pub const DECODING_COLUMNS: [&str; 7] = [
    "p",
    "L",
    "K",
    "n",
    "smoothing_error_rate",
    "filtering_error_rate",
    "filtering_over_smoothing",
];

pub fn decoding_table(rows: &[DecodingRow]) -> CsvTable {
    let mut t = CsvTable::new(DECODING_COLUMNS);
    for r in rows {
        t.push(vec![
            fmt_float(r.p),
            r.block_len.to_string(),
            r.block_margin.to_string(),
            r.n.to_string(),
            fmt_float(r.smoothing_error_rate),
            fmt_float(r.filtering_error_rate),
            fmt_opt_float(r.ratio),
        ]);
    }
    t
}

pub fn smoothing_vs_filtering(
    family: &ModelFamily,
    p_list: &[f64],
    n: usize,
    policy: BlockPolicy,
    seed: u64,
) -> Result<Vec<DecodingRow>, ExperimentError> {
    if n < MIN_DECODE_LENGTH {
        return Err(ExperimentError::DecodeTooShort(n));
    }
    p_list
        .iter()
        .map(|&p| {
            let model = family.at(p)?;
            let params = policy.params(p)?;
            let run = decode_paired(
                &model,
                params,
                n,
                RngStream::new(derive_seed(seed, &[p.to_bits(), LABEL_DECODE]), 0),
            )?;
            Ok(DecodingRow {
                p,
                block_len: params.len(),
                block_margin: params.margin(),
                n,
                smoothing_error_rate: run.smoothing_rate(),
                filtering_error_rate: run.filtering_rate(),
                ratio: (run.smoothing_errors > 0)
                    .then(|| run.filtering_rate() / run.smoothing_rate()),
            })
        })
        .collect()
}
