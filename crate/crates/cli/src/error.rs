use hswlm::evalkit::EvalError;
use hswlm::{CorpusError, EstimationError, HierarchyError, ModelError};
use thiserror::Error;

/// Command failure, mapped to a process exit code by [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("estimation failed: {0}")]
    Estimation(#[from] EstimationError),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Estimation(_) => 3,
            CliError::Evaluation(_) => 4,
        }
    }

    pub fn input(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{context}: {err}"))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<HierarchyError> for CliError {
    fn from(e: HierarchyError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Estimation(e) => CliError::Estimation(e),
            EvalError::Corpus(e) => e.into(),
            other => CliError::Evaluation(other.to_string()),
        }
    }
}
