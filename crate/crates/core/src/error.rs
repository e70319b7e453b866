use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("step size underflow at t = {t:.9} s (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state or derivative at t = {t:.9} s")]
    NonFinite { t: f64 },

    #[error("DCMot simulation requires a stance reference trajectory")]
    MissingReference,

    #[error("no complete stance phase found in trace")]
    NoStancePhase,

    #[error("channel `{channel}` has zero range ({value})")]
    ZeroRange { channel: String, value: f64 },

    #[error("channel `{channel}` missing from binning spec")]
    MissingChannel { channel: String },

    #[error("value {value} of channel `{channel}` outside domain [{min}, {max}]")]
    OutOfDomain {
        channel: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("symbol {symbol} out of range for base {base}")]
    SymbolOutOfRange { symbol: u64, base: u64 },

    #[error("sequence length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid coordinates: {0}")]
    InvalidCoordinates(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("moving-average block must be odd and positive, got {0}")]
    InvalidBlock(usize),

    #[error("trace format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical integration itself, as opposed to
    /// bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. } | Error::NonFinite { .. }
        )
    }

    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
