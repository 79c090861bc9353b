use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("frame interval [{start}, {end}) exceeds series length {frames}")]
    IntervalOutOfBounds {
        start: usize,
        end: usize,
        frames: usize,
    },

    #[error("linear system is singular beyond solver tolerance (rcond estimate {rcond:.3e})")]
    SingularSystem { rcond: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unknown label {label} (class set has {classes} classes)")]
    UnknownLabel { label: usize, classes: usize },

    #[error("class {class} has no true samples; recall is undefined")]
    EmptyClass { class: String },

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
