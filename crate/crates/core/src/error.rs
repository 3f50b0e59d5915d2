use thiserror::Error;

/// Errors produced by game construction, solvers and evaluation.
#[derive(Debug, Error)]
pub enum CirlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// The observed human action has zero likelihood under every state in the
    /// support of the belief.
    #[error("inconsistent observation: human action {action} has zero likelihood under the robot's model")]
    InconsistentObservation { action: usize },

    /// A solver or enumerator would exceed its configured budget.
    #[error("NA: {what} budget exceeded ({count} > {cap})")]
    ResourceExceeded { what: String, count: u128, cap: u128 },

    #[error("particle depletion at history depth {depth}")]
    ParticleDepletion { depth: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CirlError {
    pub fn resource(what: impl Into<String>, count: u128, cap: u128) -> Self {
        CirlError::ResourceExceeded { what: what.into(), count, cap }
    }

    /// True for errors caused by bad user input (specs, arguments, files).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CirlError::InvalidArgument(_)
                | CirlError::Validation(_)
                | CirlError::Parse(_)
                | CirlError::Version { .. }
        )
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, CirlError::ResourceExceeded { .. })
    }
}

pub type Result<T, E = CirlError> = std::result::Result<T, E>;
