use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the cap of {cap}; use the large-dimension constructor to override")]
    DimensionTooLarge { dim: usize, cap: usize },

    #[error("invalid device `{name}`: {reason}")]
    InvalidDevice { name: String, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid resolution: {0}")]
    InvalidResolution(String),

    #[error("outcome {index} out of range for device `{device}` with {count} outcomes")]
    OutcomeOutOfRange { device: String, index: usize, count: usize },

    #[error("unknown outcome label `{label}` for device `{device}`")]
    UnknownOutcome { device: String, label: String },

    #[error("sequence length {found} does not match schedule length {expected}")]
    SequenceLength { expected: usize, found: usize },

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("table of {entries} entries exceeds the limit of {limit}")]
    TableTooLarge { entries: u128, limit: u64 },

    #[error("device `{0}` is not perfectly fine-grained")]
    NotFineGrained(String),

    #[error("conditioning on an event of probability {probability:e}")]
    NullConditioning { probability: f64 },

    #[error("contract violated: {what} = {value:e} (tolerance {tolerance:e})")]
    ContractViolation {
        what: String,
        value: f64,
        tolerance: f64,
    },

    #[error("block of size {size} exceeds the recursion guard of {limit}")]
    BlockTooLarge { size: usize, limit: usize },

    #[error("subsystems are not independent: {0}")]
    NotIndependent(String),

    #[error("subsystems are not identical: {0}")]
    NotIdentical(String),

    #[error("coupling observables do not commute (max commutator {0:e})")]
    NonCommutingCouplings(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(what: &str, value: f64, tolerance: f64) -> Result<()> {
    if value <= tolerance {
        Ok(())
    } else {
        Err(Error::ContractViolation {
            what: what.to_string(),
            value,
            tolerance,
        })
    }
}
