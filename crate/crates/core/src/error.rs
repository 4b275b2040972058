use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("M and N must be coprime (got M={m}, N={n}, GCD={gcd})")]
    NotCoprime { m: u32, n: u32, gcd: u32 },

    #[error("{name} must be at least {min} (got {value})")]
    ParamTooSmall {
        name: &'static str,
        min: u32,
        value: u32,
    },

    #[error("{0}")]
    InvalidParam(String),

    #[error("sensor position list is empty")]
    EmptyPositions,

    #[error("duplicate sensor position {0}")]
    DuplicatePosition(u32),

    #[error("scan grid needs at least 2 points (got {0})")]
    GridTooSmall(usize),

    #[error("direction cosine {0} is outside the allowed range")]
    DirectionOutOfRange(f64),

    #[error("responses do not share the same scan grid and steering direction")]
    MismatchedResponses,

    #[error("{combiner} processing needs {expected} responses (got {got})")]
    WrongResponseCount {
        combiner: &'static str,
        expected: &'static str,
        got: usize,
    },

    #[error("no null found on the {side} side of the main lobe; pattern too coarse or flat")]
    NoNullFound { side: &'static str },

    #[error("pattern has no sidelobe region outside the main lobe")]
    NoSidelobeRegion,

    #[error("snapshot matrix has {got} sensors, geometry has {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("failed to parse sensor positions: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
