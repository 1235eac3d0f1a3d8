use cwta_core::ingest::IngestError;
use cwta_core::power::PowerError;
use cwta_core::sim::SimError;
use thiserror::Error;

/// Failure classes mapped onto the exit-code contract.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2: bad flags, config or unparseable input.
    #[error("{0}")]
    Usage(String),
    /// Exit code 3: well-formed input whose content fails validation.
    #[error("{0}")]
    DataQuality(String),
    /// Exit code 4.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::DataQuality(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Trajectory(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PowerError> for CliError {
    fn from(e: PowerError) -> Self {
        match e {
            PowerError::Sim(s) => s.into(),
            PowerError::NoReplications | PowerError::EmptyGrid(_) => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        if e.is_data_quality() {
            let ids = e.patient_ids();
            let msg = if ids.is_empty() {
                e.to_string()
            } else {
                format!("{e}\noffending patients: {}", ids.join(", "))
            };
            return CliError::DataQuality(msg);
        }
        match e {
            IngestError::Stats(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
