use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency {freq} Hz is outside the open range (0, {limit}) Hz")]
    FrequencyOutOfRange { freq: f64, limit: f64 },

    #[error(
        "bandwidth {requested} Hz is narrower than the minimum {minimum} Hz \
         for damping {damping} at {sample_rate} Hz"
    )]
    BandwidthTooNarrow {
        requested: f64,
        minimum: f64,
        damping: f64,
        sample_rate: f64,
    },

    #[error(
        "bandwidth {requested} Hz has no tabulated Lyapunov coefficient at {sample_rate} Hz \
         (lowest supported {lowest} Hz)"
    )]
    UnsupportedBandwidthAtHighRate {
        requested: f64,
        lowest: f64,
        sample_rate: f64,
    },

    #[error(
        "search normalization found no characteristic frequency for {freq} Hz at {sample_rate} Hz"
    )]
    NoSolutionInRange { freq: f64, sample_rate: f64 },

    #[error("non-finite input sample at position {position}")]
    NonFiniteInput { position: u64 },

    #[error("unsupported sample rate {0} Hz")]
    UnsupportedSampleRate(f64),

    #[error("unsupported audio layout: {0}")]
    UnsupportedLayout(String),

    #[error("malformed WAV file {path}: {reason}")]
    MalformedWav { path: PathBuf, reason: String },

    #[error("cannot compute SNR of a silent signal")]
    SilentSignal,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("measurement failed: {0}")]
    Measurement(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
