use thiserror::Error;

/// Errors raised by the models, planners and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidTheta(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("channel {channel} out of range for {n_channels} channels")]
    ChannelOutOfRange { channel: usize, n_channels: usize },

    /// Every support point of a grid belief assigns zero likelihood to the
    /// observation.
    #[error("degenerate evidence: observation {observation} on channel {channel} has zero probability under the belief")]
    DegenerateEvidence { channel: usize, observation: u8 },

    #[error("state space of {required} entries exceeds the budget of {budget}")]
    ResourceLimit { required: u128, budget: u128 },

    /// No channel is ever free, so there is nothing to share.
    #[error("no channel has positive availability")]
    NoOpportunity,

    #[error("pull counts sum to {got}, expected {expected}")]
    CountMismatch { expected: u64, got: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Stable identifier for scripts reading command-line errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidTheta(_) => "invalid-theta",
            Error::InvalidPrior(_) => "invalid-prior",
            Error::InvalidConfig(_) => "invalid-config",
            Error::ChannelOutOfRange { .. } => "channel-out-of-range",
            Error::DegenerateEvidence { .. } => "degenerate-evidence",
            Error::ResourceLimit { .. } => "resource-limit",
            Error::NoOpportunity => "no-opportunity",
            Error::CountMismatch { .. } => "count-mismatch",
            Error::Precondition(_) => "precondition",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
