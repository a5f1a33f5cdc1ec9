//! Run configuration: the JSON file of record plus command-line overrides.

use crate::error::CliError;
use rarehmm::experiments::{BlockPolicy, ModelFamily};
use rarehmm::model::{Channel, GeneratorMatrix, HmmModel};
use rarehmm::reconstruction::BlockOverrides;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Balanced,
    Desk,
    Asymptotic,
}

/// Caps and secondary sizes; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Decoding path length per `p` in sweeps.
    pub n_decode: usize,
    /// Maximum `|T|^n·(|S|+1)` work for exact brackets.
    pub bracket_budget: u64,
    /// Block policy for sweeps when no `L`/`K` override is given.
    pub policy: PolicyName,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            n_decode: 1_000_000,
            bracket_budget: rarehmm::entropy::DEFAULT_BRACKET_BUDGET,
            policy: PolicyName::Balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
    pub generator: Vec<Vec<f64>>,
    pub channel: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub overrides: BlockOverrides,
    #[serde(default)]
    pub budgets: Budgets,
}

/// Values given on the command line; each one replaces the config field.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub seed: Option<u64>,
    pub p: Option<f64>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub block_l: Option<usize>,
    pub block_k: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, flags: &FlagOverrides) {
        if let Some(p) = flags.p {
            self.p = Some(p);
            self.p_list = None;
        }
        self.seed = flags.seed.or(self.seed);
        self.n = flags.n.or(self.n);
        self.reps = flags.reps.or(self.reps);
        self.overrides.len = flags.block_l.or(self.overrides.len);
        self.overrides.margin = flags.block_k.or(self.overrides.margin);
    }

    /// SHA-256 of the effective configuration's canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn n_or(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    pub fn reps_or(&self, default: usize) -> usize {
        self.reps.unwrap_or(default)
    }

    /// Checks labels, model and every `p` before any computation.
    pub fn validate(&self) -> Result<Validated, CliError> {
        let generator = GeneratorMatrix::new(&self.generator)
            .map_err(|e| CliError::Invalid(format!("generator: {e}")))?;
        let channel =
            Channel::new(&self.channel).map_err(|e| CliError::Invalid(format!("channel: {e}")))?;
        if !self.states.is_empty() && self.states.len() != generator.n_states() {
            return Err(CliError::Invalid(format!(
                "{} state labels for {} states",
                self.states.len(),
                generator.n_states()
            )));
        }
        if !self.outputs.is_empty() && self.outputs.len() != channel.n_outputs() {
            return Err(CliError::Invalid(format!(
                "{} output labels for {} outputs",
                self.outputs.len(),
                channel.n_outputs()
            )));
        }
        let p_values = match (self.p, &self.p_list) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either \"p\" or \"p_list\", not both".into(),
                ))
            }
            (Some(p), None) => vec![p],
            (None, Some(list)) if !list.is_empty() => list.clone(),
            _ => return Err(CliError::Config("missing \"p\" or \"p_list\"".into())),
        };
        let family = ModelFamily::new(generator, channel);
        let models = p_values
            .iter()
            .map(|&p| family.at(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Invalid(format!("model: {e}")))?;
        Ok(Validated {
            family,
            p_values,
            models,
        })
    }

    pub fn sweep_policy(&self) -> BlockPolicy {
        if self.overrides.len.is_some() || self.overrides.margin.is_some() {
            return BlockPolicy::Fixed(self.overrides);
        }
        match self.budgets.policy {
            PolicyName::Balanced => BlockPolicy::Balanced,
            PolicyName::Desk => BlockPolicy::Desk,
            PolicyName::Asymptotic => BlockPolicy::Asymptotic,
        }
    }
}

pub struct Validated {
    pub family: ModelFamily,
    pub p_values: Vec<f64>,
    pub models: Vec<HmmModel>,
}

impl Validated {
    /// The single model of a one-`p` command.
    pub fn single(&self, command: &str) -> Result<&HmmModel, CliError> {
        match self.models.as_slice() {
            [m] => Ok(m),
            _ => Err(CliError::Invalid(format!(
                "{command} needs a single p, got {} values",
                self.models.len()
            ))),
        }
    }
}
