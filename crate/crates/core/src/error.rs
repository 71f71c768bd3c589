use thiserror::Error;

/// Errors raised by spline algebra, layers, the model and data handling.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial degree {degree} exceeds the cap of {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("invalid spline: {0}")]
    InvalidSpline(String),

    #[error("time {t} is outside the allowed range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("spline spans differ: [{a0}, {a1}] vs [{b0}, {b1}]")]
    SpanMismatch { a0: f64, a1: f64, b0: f64, b1: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("AUROC needs both classes present in the evaluation set")]
    SingleClassAuc,

    #[error("class {class} has {count} samples, stratified split needs at least 3")]
    ClassTooSmall { class: usize, count: usize },

    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: times are not strictly increasing")]
    NonMonotoneTimes { line: usize },

    #[error("non-finite value in tensor `{0}`")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
