use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Motor command outside [0, pi/2]; callers are expected to clamp.
    #[error("rejected action: motor command {0} out of range")]
    RejectedAction(f64),

    /// No flexion along the preset pattern achieves dual fingertip contact.
    #[error("unreachable preset pose: {0}")]
    Unreachable(String),

    /// All particle weights underflowed to zero even in log domain.
    #[error("degenerate particle weights (all log-likelihoods -inf)")]
    DegenerateWeights,

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate samples: zero variance and identical")]
    DegenerateSamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
