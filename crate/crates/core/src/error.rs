use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the phenology fitting library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spring and autumn rates sum to zero; crossover undefined")]
    DegenerateRates,

    #[error("inverse-gamma scale for sigma2 must be supplied")]
    MissingIgScale,

    #[error("invalid prior interval for {name}: ({lower}, {upper})")]
    InvalidInterval {
        name: String,
        lower: f64,
        upper: f64,
    },

    #[error("prior bound for {0} depends on another parameter and cannot be overridden")]
    DependentBound(String),

    #[error("starting value outside prior support: {0}")]
    InvalidStartingValue(String),

    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("observation series is empty")]
    EmptySeries,

    #[error("unknown functional `{0}`")]
    UnknownFunctional(String),

    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: not an LSPB file (bad magic)")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported LSPB version {found}")]
    VersionMismatch { path: PathBuf, found: u16 },

    #[error("{path}: truncated file")]
    TruncatedFile { path: PathBuf },

    #[error("{path}: empty input")]
    EmptyFile { path: PathBuf },

    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("coordinates are not on a regular lattice: {0}")]
    IrregularGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
