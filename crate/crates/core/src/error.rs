use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no periodogram bin inside [{lo} Hz, {hi} Hz]")]
    BandEmpty { lo: f64, hi: f64 },
    #[error("frame layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("phase tracker diverged: innovation bound exceeded on {fraction:.4} of samples")]
    Divergence { fraction: f64 },
    #[error("degenerate window: summed magnitude below 1e-12")]
    DegenerateWindow,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("frame synchronization failed: peak metric {peak_metric:.3} below {threshold:.3}")]
    SyncFailed { peak_metric: f64, threshold: f64 },
    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("clock skew estimate {0} outside the 1000 ppm sanity bound")]
    SkewOutOfRange(f64),
    #[error("invalid calibration: shot-noise unit {0} is not positive")]
    InvalidCalibration(f64),
    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("report is empty")]
    EmptyReport,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
