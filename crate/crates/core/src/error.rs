use thiserror::Error;

/// Errors raised by parameter validation and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("feedback gain k must be nonzero")]
    ZeroGain,
    #[error("variance `{0}` must be nonnegative")]
    NegativeVariance(&'static str),
    #[error("cost weight `{0}` must be nonnegative")]
    NegativeWeight(&'static str),
    #[error("parameter `{0}` must be finite")]
    NonFinite(&'static str),
    #[error("noise-to-noise ratio is undefined when m + w = 0")]
    IllDefinedNnr,
    #[error("noise-to-noise ratio requires an uplink mask variance n > 0")]
    ZeroUplink,
    #[error("input `{0}` must be nonnegative")]
    NegativeInput(&'static str),
    #[error("all noise variances are zero for an unstable or unobserved plant")]
    DegenerateAll,
    #[error("Riccati iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("closed loop is unstable (|a + k| >= 1)")]
    UnstableClosedLoop,
    #[error("finite-horizon information requires n > 0 and m + w > 0")]
    DegenerateMasks,
    #[error("noise-to-noise ratio must be positive")]
    NonPositiveAlpha,
    #[error("horizon {horizon} exceeds the supported maximum of {max}")]
    HorizonTooLarge { horizon: usize, max: usize },
    #[error("covariance block `{0}` is singular")]
    SingularBlock(String),
    #[error("horizon {horizon} does not exceed the burn-in of {burn_in} steps")]
    HorizonTooShort { horizon: usize, burn_in: usize },
    #[error("trade-off design requires process noise w > 0")]
    ZeroProcessNoise,
    #[error("input list is empty")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroGain => "ZeroGain",
            Error::NegativeVariance(_) => "NegativeVariance",
            Error::NegativeWeight(_) => "NegativeWeight",
            Error::NonFinite(_) => "NonFinite",
            Error::IllDefinedNnr => "IllDefinedNnr",
            Error::ZeroUplink => "ZeroUplink",
            Error::NegativeInput(_) => "NegativeInput",
            Error::DegenerateAll => "DegenerateAll",
            Error::NoConvergence(_) => "NoConvergence",
            Error::UnstableClosedLoop => "UnstableClosedLoop",
            Error::DegenerateMasks => "DegenerateMasks",
            Error::NonPositiveAlpha => "NonPositiveAlpha",
            Error::HorizonTooLarge { .. } => "HorizonTooLarge",
            Error::SingularBlock(_) => "SingularBlock",
            Error::HorizonTooShort { .. } => "HorizonTooShort",
            Error::ZeroProcessNoise => "ZeroProcessNoise",
            Error::EmptyInput => "EmptyInput",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
