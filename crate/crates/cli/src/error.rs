use rarehmm::entropy::EntropyError;
use rarehmm::experiments::ExperimentError;
use rarehmm::model::ModelError;
use rarehmm::reconstruction::ReconstructionError;
use rarehmm::sampling::SamplingError;
use std::fmt::Debug;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Invalid(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Budget(_) => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}

/// `"VariantName: message"`, so the violated constraint is named.
fn named<E: Debug + std::fmt::Display>(e: &E) -> String {
    let debug = format!("{e:?}");
    let name: String = debug.chars().take_while(|c| c.is_alphanumeric()).collect();
    format!("{name}: {e}")
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Invalid(named(&e))
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::RejectionBudgetExceeded { .. } => CliError::Budget(named(&e)),
            _ => CliError::Invalid(named(&e)),
        }
    }
}

impl From<EntropyError> for CliError {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::BudgetExceeded { .. } => CliError::Budget(named(&e)),
            EntropyError::Model(m) => m.into(),
            _ => CliError::Invalid(named(&e)),
        }
    }
}

impl From<ReconstructionError> for CliError {
    fn from(e: ReconstructionError) -> Self {
        match e {
            ReconstructionError::Sampling(s) => s.into(),
            _ => CliError::Invalid(named(&e)),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Entropy(m) => m.into(),
            ExperimentError::Reconstruction(m) => m.into(),
            _ => CliError::Invalid(named(&e)),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
