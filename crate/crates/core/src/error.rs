use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not expanding")]
    NotExpanding,
    #[error("lattice is not full rank (rank {rank} in dimension {dim})")]
    RankDeficient { rank: usize, dim: usize },
    #[error("lattice containment fails")]
    NotContained,
    #[error("kernel chain did not reach index {target} within {cap} steps (last index {last}); input may not be expanding")]
    StabilizationCap { target: String, cap: usize, last: String },
    #[error("digit set has {found} elements, expected {expected}")]
    DigitCount { expected: String, found: usize },
    #[error("digit set must contain 0")]
    MissingZeroDigit,
    #[error("vector is not in Z^n[A]: {0}")]
    NotInModule(String),
    #[error("enumeration size {size} exceeds cap {cap}")]
    CapExceeded { size: String, cap: usize },
    #[error("values come from different b-adic contexts")]
    ContextMismatch,
    #[error("insufficient depth: need {needed}, have {have}")]
    InsufficientDepth { needed: i64, have: i64 },
    #[error("b=1: solenoid trivial, tile ops disabled")]
    DegenerateSolenoid,
    #[error("series for the adapted norm did not converge within {0} terms")]
    SeriesDivergence(usize),
    #[error("no admissible shift up to {0} for a full rank residue system")]
    NoAdmissibleShift(usize),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error at {at}: {msg}")]
    Parse { at: String, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn parse(at: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse { at: at.into(), msg: msg.into() }
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    /// Process exit code: 2 config, 3 math precondition, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::Io(_) => 2,
            Error::DimensionMismatch { .. }
            | Error::DigitCount { .. }
            | Error::MissingZeroDigit
            | Error::NotInModule(_) => 2,
            Error::Invariant(_) => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
