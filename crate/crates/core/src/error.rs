use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hilbert space dimension {dim} exceeds the limit of {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("factor dimension must be positive, got {0}")]
    InvalidDimension(usize),

    #[error("factor index {index} out of range for a {len}-factor space")]
    FactorIndex { index: usize, len: usize },

    #[error("shape mismatch: expected dimension {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("time grid must be non-empty and strictly increasing")]
    TimeGrid,

    #[error("step size underflow at t = {t} ns (h = {h:e} ns)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("state invariant violated at t = {t} ns: {what}")]
    Invariant { t: f64, what: String },

    #[error("Fock truncation exceeded at t = {t} ns: top-level population {population:e}")]
    Truncation { t: f64, population: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("pulse sequence violates a timing constraint: {0}")]
    Sequence(String),

    #[error("malformed event record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("no trials for {0}")]
    EmptyCell(String),

    #[error("false-detection rate {false_rate} is not below the observed rate {observed} in bin {bin}")]
    FalseRate { bin: String, false_rate: f64, observed: f64 },

    #[error("inference did not converge after {iterations} iterations (last shift {last_shift:e})")]
    NonConvergence { iterations: usize, last_shift: f64 },

    #[error("threshold kind {0} needs a mean photon number")]
    MissingMeanPhotons(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
