use thiserror::Error;

/// Errors produced by the library and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0} is not a dyadic integer")]
    NotDyadic(u64),

    #[error("interval family is not pairwise disjoint: [{0}, {1}) overlaps [{2}, {3})")]
    OverlappingIntervals(i64, i64, i64, i64),

    #[error("scale {0} is not in the active scale set")]
    ScaleOutOfRange(u64),

    #[error("function has negative value {value} at site {site}")]
    NegativeValue { site: i64, value: f64 },

    #[error("zero function has no weak-type ratio")]
    ZeroFunction,

    #[error("FFT buffer of length {0} exceeds the memory guard")]
    FftTooLarge(usize),

    #[error("dense kernel rectangle {0}x{1} exceeds the memory guard")]
    KernelTooLarge(usize, usize),

    #[error("band half-width {band} is wider than the kernel diagonal support {support}")]
    BandTooWide { band: u64, support: u64 },

    #[error("unknown input family `{0}`")]
    UnknownFamily(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
