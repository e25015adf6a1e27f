use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed law: {0}")]
    MalformedLaw(String),
    #[error("unknown state id `{0}`")]
    UnknownState(String),
    #[error("shift by {k} exceeds sequence length {len}")]
    OutOfRange { k: usize, len: usize },
    #[error("negative argument u = {0}")]
    NegativeArgument(f64),
    #[error("argument u must be positive, got {0}")]
    NonpositiveU(f64),
    #[error("strategy mismatch: {0}")]
    StrategyMismatch(String),
    #[error("curves live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("enumeration depth {depth} exceeds the limit {max}")]
    TooDeep { depth: usize, max: usize },
    #[error("state `{0}` has a continuous law; an exact computation is not available")]
    ContinuousState(String),
    #[error("convolution produced {atoms} atoms at level {level} (cap {cap})")]
    AtomExplosion { level: usize, atoms: usize, cap: usize },
    #[error("ellipticity delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("uniform ellipticity fails: m(theta) = {m} <= delta = {delta} in state `{state}`")]
    EllipticityViolation { state: String, m: f64, delta: f64 },
    #[error("population {population} exceeds cap {cap} at generation {generation}")]
    CapExceeded { generation: usize, population: usize, cap: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable snake_case name of the variant, for machine-readable records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedLaw(_) => "malformed_law",
            Error::UnknownState(_) => "unknown_state",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NegativeArgument(_) => "negative_argument",
            Error::NonpositiveU(_) => "nonpositive_u",
            Error::StrategyMismatch(_) => "strategy_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::TooDeep { .. } => "too_deep",
            Error::ContinuousState(_) => "continuous_state",
            Error::AtomExplosion { .. } => "atom_explosion",
            Error::InvalidDelta(_) => "invalid_delta",
            Error::EllipticityViolation { .. } => "ellipticity_violation",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::Precondition(_) => "precondition",
            Error::TooLarge(_) => "too_large",
            Error::Parse(_) => "parse",
        }
    }
}
