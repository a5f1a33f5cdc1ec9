//! Stationary sample paths of the hidden chain and its channel output.
//!
//! Randomness comes from ChaCha8 keyed by a master seed, with the stream
//! index selecting an independent keystream. Replicates on distinct stream
//! indices can run in any order and reproduce bit-for-bit.

use crate::model::HmmModel;
use crate::reconstruction::{classify_block, BlockParams, EventClass, Resolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Attempts allowed per conditioned block before giving up.
pub const DEFAULT_REJECTION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("rejection budget exceeded after {attempts} attempts")]
    RejectionBudgetExceeded { attempts: u64 },
    #[error("conditioning on {0:?} is not supported; use Many, Boundary or Good")]
    UnsupportedEvent(EventClass),
}

/// `(master seed, stream index)` pair naming one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// Mixes a master seed with a label path into a fresh seed (SplitMix64
/// finalizer applied per component).
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    labels.iter().fold(mix(master), |acc, &l| mix(acc ^ mix(l)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub stream: RngStream,
    pub fingerprint: String,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Inverse-CDF tables for the initial law, the transition rows and the
/// emission rows. Cumulative entries from the last positive-mass index on are
/// `+∞` so rounding in the row sum can never select a zero-mass symbol.
#[derive(Debug, Clone)]
pub struct Sampler {
    n_states: usize,
    n_outputs: usize,
    initial: Vec<f64>,
    transition: Vec<f64>,
    emission: Vec<f64>,
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let last = row.iter().rposition(|&v| v > 0.0).unwrap_or(row.len() - 1);
    let mut acc = 0.0;
    row.iter()
        .enumerate()
        .map(|(k, &v)| {
            acc += v;
            if k >= last {
                f64::INFINITY
            } else {
                acc
            }
        })
        .collect()
}

#[inline]
fn draw(cdf: &[f64], u: f64) -> u8 {
    let mut k = 0;
    while u >= cdf[k] {
        k += 1;
    }
    k as u8
}

impl Sampler {
    pub fn new(model: &HmmModel) -> Self {
        let (s, t) = (model.n_states(), model.n_outputs());
        let transition = (0..s)
            .flat_map(|i| cumulative(model.transition().entries().row(i)))
            .collect();
        let emission = (0..s)
            .flat_map(|i| cumulative(model.channel().row(i)))
            .collect();
        Self {
            n_states: s,
            n_outputs: t,
            initial: cumulative(model.stationary().weights()),
            transition,
            emission,
        }
    }

    #[inline]
    pub fn initial<R: Rng>(&self, rng: &mut R) -> u8 {
        draw(&self.initial, rng.random())
    }

    #[inline]
    pub fn step<R: Rng>(&self, x: u8, rng: &mut R) -> u8 {
        let s = self.n_states;
        let row = x as usize * s;
        draw(&self.transition[row..row + s], rng.random())
    }

    #[inline]
    pub fn emit<R: Rng>(&self, x: u8, rng: &mut R) -> u8 {
        let t = self.n_outputs;
        let row = x as usize * t;
        draw(&self.emission[row..row + t], rng.random())
    }

    /// Calls `visit(x_k, y_k)` for `k = 0..n`, drawing `x_0, y_0, x_1, y_1, …`
    /// in that order from `rng`.
    #[inline]
    pub fn walk<R: Rng>(&self, n: usize, rng: &mut R, mut visit: impl FnMut(u8, u8)) {
        if n == 0 {
            return;
        }
        let mut x = self.initial(rng);
        visit(x, self.emit(x, rng));
        for _ in 1..n {
            x = self.step(x, rng);
            visit(x, self.emit(x, rng));
        }
    }

    /// Hidden block of length `len` from the stationary start.
    pub fn hidden_block<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        let mut x = self.initial(rng);
        out.push(x);
        for _ in 1..len {
            x = self.step(x, rng);
            out.push(x);
        }
        out
    }

    /// Channel outputs for a given hidden block.
    pub fn observe<R: Rng>(&self, x: &[u8], rng: &mut R) -> Vec<u8> {
        x.iter().map(|&xi| self.emit(xi, rng)).collect()
    }
}

/// Stationary path of length `n`; `x_0 ~ π`, `x_{k+1} ~ P(x_k, ·)`,
/// `y_k ~ Q(x_k, ·)`.
pub fn sample_path(model: &HmmModel, n: usize, stream: RngStream) -> PathSample {
    let sampler = Sampler::new(model);
    let mut rng = stream.rng();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    sampler.walk(n, &mut rng, |xi, yi| {
        x.push(xi);
        y.push(yi);
    });
    PathSample {
        x,
        y,
        stream,
        fingerprint: model.fingerprint(),
    }
}

/// Rejection sampler for a hidden block whose transition pattern falls in
/// `event` (`Many`, `Boundary` or `Good`).
pub fn sample_hidden_block_conditioned(
    model: &HmmModel,
    params: BlockParams,
    stream: RngStream,
    event: EventClass,
    budget: u64,
) -> Result<Vec<u8>, SamplingError> {
    if !matches!(
        event,
        EventClass::Many | EventClass::Boundary | EventClass::Good
    ) {
        return Err(SamplingError::UnsupportedEvent(event));
    }
    let sampler = Sampler::new(model);
    let mut rng = stream.rng();
    sample_block_where(&sampler, params.len(), &mut rng, budget, |x| {
        classify_block(x, params, Resolution::Coarse).ok() == Some(event)
    })
}

pub(crate) fn sample_block_where<R: Rng>(
    sampler: &Sampler,
    len: usize,
    rng: &mut R,
    budget: u64,
    accept: impl Fn(&[u8]) -> bool,
) -> Result<Vec<u8>, SamplingError> {
    for _ in 0..budget {
        let x = sampler.hidden_block(len, rng);
        if accept(&x) {
            return Ok(x);
        }
    }
    Err(SamplingError::RejectionBudgetExceeded { attempts: budget })
}

/// Sidecar written next to a binary path dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub fingerprint: String,
    pub seed: u64,
    pub stream: u64,
    pub length: usize,
    pub n_states: usize,
    pub n_outputs: usize,
    pub hidden_file: String,
    pub observed_file: String,
}

/// Writes `<stem>.hidden.bin`, `<stem>.observed.bin` (one byte per symbol)
/// and `<stem>.json`. Returns the sidecar path.
pub fn write_path_dump(
    sample: &PathSample,
    model: &HmmModel,
    dir: &Path,
    stem: &str,
) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let hidden_file = format!("{stem}.hidden.bin");
    let observed_file = format!("{stem}.observed.bin");
    fs::write(dir.join(&hidden_file), &sample.x)?;
    fs::write(dir.join(&observed_file), &sample.y)?;
    let sidecar = DumpSidecar {
        fingerprint: sample.fingerprint.clone(),
        seed: sample.stream.seed,
        stream: sample.stream.index,
        length: sample.len(),
        n_states: model.n_states(),
        n_outputs: model.n_outputs(),
        hidden_file,
        observed_file,
    };
    let path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&sidecar).map_err(io::Error::other)?;
    fs::write(&path, json)?;
    Ok(path)
}

pub fn read_path_dump(sidecar_path: &Path) -> io::Result<PathSample> {
    let sidecar: DumpSidecar =
        serde_json::from_slice(&fs::read(sidecar_path)?).map_err(io::Error::other)?;
    let dir = sidecar_path.parent().unwrap_or(Path::new("."));
    let x = fs::read(dir.join(&sidecar.hidden_file))?;
    let y = fs::read(dir.join(&sidecar.observed_file))?;
    if x.len() != sidecar.length || y.len() != sidecar.length {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "dump length does not match sidecar",
        ));
    }
    Ok(PathSample {
        x,
        y,
        stream: RngStream::new(sidecar.seed, sidecar.stream),
        fingerprint: sidecar.fingerprint,
    })
}
