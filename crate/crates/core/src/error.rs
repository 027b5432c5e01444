use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cutoff {cutoff} is too small: {reason}")]
    CutoffTooSmall { cutoff: usize, reason: String },

    #[error("invalid state parameter: {0}")]
    InvalidStateParameter(String),

    #[error("top Fock level of mode {mode} holds probability {tail:.3e}, above tolerance {tolerance:.1e}")]
    TruncationTail {
        mode: usize,
        tail: f64,
        tolerance: f64,
    },

    #[error("state is not a valid density operator: {0}")]
    InvalidDensity(String),

    #[error("mode index {index} out of range for {n_modes} modes")]
    ModeIndex { index: usize, n_modes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("expectation value has imaginary part {0:.3e}; operator is not Hermitian")]
    NotHermitian(f64),

    #[error("pulse envelopes are not comparable: {0}")]
    IncomparableEnvelopes(String),

    #[error("invalid LO train: {0}")]
    InvalidTrain(String),

    #[error("LO train fails the mode-independence gate: max overlap {max_overlap:.3e} >= tolerance {tolerance:.1e}")]
    OverlapGate { max_overlap: f64, tolerance: f64 },

    #[error("invalid measurement setting: {0}")]
    InvalidSetting(String),

    #[error("moment order {order} exceeds the trusted maximum {max} for cutoff {cutoff}")]
    OrderTooHigh {
        order: usize,
        max: usize,
        cutoff: usize,
    },

    #[error("missing correlation entry ⟨F1^{0} F2^{1}⟩")]
    MissingEntry(usize, usize),

    #[error("no samples supplied")]
    EmptyBatches,

    #[error("inconsistent batches: {0}")]
    InconsistentBatches(String),

    #[error("q system needs {needed} distinct q values, got {got}")]
    SingularQSystem { needed: usize, got: usize },

    #[error("invalid detection efficiency {0}; expected 0 < eta <= 1")]
    InvalidEfficiency(f64),

    #[error("harmonic fit needs at least {needed} uniformly spaced Δφ points, got {got}")]
    GridTooCoarse { needed: usize, got: usize },

    #[error("aliasing in channel ⟨F1^{a} F2^{b}⟩: residual {residual:.3e} exceeds 5 x SE ({se:.3e})")]
    Aliasing {
        a: usize,
        b: usize,
        residual: f64,
        se: f64,
    },

    #[error("mismatched tables: {0}")]
    Mismatch(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("hash mismatch for {path}: manifest {expected}, file {found}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("config hash mismatch: {0} vs {1}")]
    ConfigHashMismatch(String, String),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
