//! Hidden Markov chains in the rare-transition regime `P(p) = I + pA`.
//!
//! - [`model`]: the chain family, the channel and closed-form entropies.
//! - [`sampling`]: reproducible stationary sample paths.
//! - [`entropy`]: forward likelihoods, Monte Carlo entropy-rate estimators and
//!   exact brackets.
//! - [`reconstruction`]: block maximum-likelihood smoothing and a causal
//!   filtering baseline.
//! - [`experiments`]: parameter sweeps over `p` and their CSV output.

pub mod entropy;
pub mod experiments;
mod matrix;
pub mod model;
pub mod output;
pub mod reconstruction;
pub mod sampling;

pub use matrix::Matrix;
