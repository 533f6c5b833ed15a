use alloc::string::String;
use core::fmt;

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors surfaced by validation and the processing pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A channel parameter is outside its physical domain.
    InvalidParams(String),
    /// A link-layer setting is inconsistent (non-positive span, ratio not
    /// an integer multiple of the sample interval, ...).
    InvalidConfig(String),
    /// A trace violates its invariants (non-finite or non-positive
    /// samples, empty, bad grid).
    InvalidTrace(String),
    /// An illumination schedule is empty, unordered, or has gaps.
    InvalidSchedule(String),
    /// A sample grid extends outside the schedule it is evaluated on.
    GridOutsideSchedule,
    /// A training or detection window disagrees with the trace or the
    /// bit sequence that is supposed to cover it.
    WindowMismatch(String),
    /// The training bits do not exercise both illumination states, so
    /// the lit-state parameters cannot be identified.
    Unidentifiable(String),
    /// The trace is too short for the requested operation.
    TraceTooShort { needed: usize, len: usize },
    /// A symbol window has no overlap with the differentiated signal.
    EmptyMetricWindow { symbol: usize },
    /// Threshold estimation needs at least one pilot of each class.
    ThresholdUndefined,
    /// Two sequences that must align have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// A numeric quantity became non-finite.
    NonFinite(String),
    /// A link run could not obtain an initial parameter estimate.
    EstimationFailed(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(msg) => write!(f, "invalid channel parameters: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid link configuration: {msg}"),
            Error::InvalidTrace(msg) => write!(f, "invalid trace: {msg}"),
            Error::InvalidSchedule(msg) => write!(f, "invalid illumination schedule: {msg}"),
            Error::GridOutsideSchedule => {
                write!(f, "sample grid extends outside the illumination schedule")
            }
            Error::WindowMismatch(msg) => write!(f, "window mismatch: {msg}"),
            Error::Unidentifiable(msg) => write!(f, "parameters not identifiable: {msg}"),
            Error::TraceTooShort { needed, len } => {
                write!(f, "trace too short: need {needed} samples, have {len}")
            }
            Error::EmptyMetricWindow { symbol } => {
                write!(f, "no detection-metric samples fall inside symbol {symbol}")
            }
            Error::ThresholdUndefined => {
                write!(f, "threshold undefined: pilots contain only one bit class")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "sequence length mismatch: {left} vs {right}")
            }
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::EstimationFailed(msg) => write!(f, "estimation failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
