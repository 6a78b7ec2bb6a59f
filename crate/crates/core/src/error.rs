use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the formula being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation produced an infinite or NaN value (e.g. a pole on the jω axis).
    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("waveform too short: spans {span:.4e} s, need at least {needed:.4e} s")]
    TooShort { span: f64, needed: f64 },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("protocol error: expected phase {expected}, controller is in {actual}")]
    Protocol { expected: String, actual: String },

    #[error("pulse overlap: {} event(s) would be dropped (indices {dropped:?})", dropped.len())]
    Overflow { dropped: Vec<usize> },

    #[error("frequency grids do not match: {0}")]
    GridMismatch(String),

    #[error("no overlap between spectrum and mask")]
    NoOverlap,

    #[error("aliasing guard: sample rate {sample_rate:.4e} Hz < 4 x {max_frequency:.4e} Hz")]
    Aliasing {
        sample_rate: f64,
        max_frequency: f64,
    },

    #[error("numerical instability: {0}")]
    Unstable(String),

    #[error("invalid config at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Prefixes the key path of a config error with its enclosing section.
    pub fn within(self, section: &str) -> Self {
        match self {
            Error::Config { path, reason } => Error::config(format!("{section}.{path}"), reason),
            other => other,
        }
    }
}
