use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid radio config: {0}")]
    InvalidConfig(String),

    #[error("unknown spreading factor SF{0}")]
    UnknownSf(u8),

    #[error("SNR history is empty")]
    EmptyHistory,

    #[error("invalid ADR state: {0}")]
    InvalidAdrState(String),

    #[error("distance {distance} m is below the reference distance {reference} m")]
    DistanceBelowReference { distance: f64, reference: f64 },

    #[error("frequency must be positive, got {0} MHz")]
    NonPositiveFrequency(f64),

    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("model variant mismatch: expected {expected}, got {got}")]
    VariantMismatch { expected: &'static str, got: &'static str },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("parameter vector has {got} entries, model needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("underdetermined fit: {observations} observations for {params} parameters (need at least {needed})")]
    Underdetermined { observations: usize, params: usize, needed: usize },

    #[error("normal equations are singular: the design matrix is rank deficient")]
    SingularNormalEquations,

    #[error("invalid fit config: {0}")]
    InvalidFitConfig(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("feature `{0}` has zero variance")]
    ZeroVarianceFeature(String),

    #[error("too few records: need at least {needed}, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("input is empty")]
    Empty,

    #[error("actual values are constant; R² is undefined")]
    ConstantActual,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
