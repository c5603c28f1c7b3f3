use thiserror::Error;

/// Errors raised by the exact and floating-point layers.
///
/// Every variant carries a stable name (see [`Error::name`]) which the CLI
/// prints so callers can match on the originating failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("linear system has no solution")]
    NoSolution,
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad index: {0}")]
    BadIndex(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no formal gauge matches the normal form: {0}")]
    NoMatch(String),
    #[error("normal form is resonant")]
    NonResonantRequired,
    #[error("zero-dimensional connection")]
    ZeroDimension,
    #[error("cannot re-block: {0}")]
    ReblockFailure(String),
    #[error("operation not defined: {0}")]
    NotDefined(String),
    #[error("leading jet coefficient is singular")]
    SingularLeadingCoefficient,
    #[error("object is not stable")]
    NotStable,
    #[error("resonant exponent: {0}")]
    ResonantExponent(String),
    #[error("irregular type at infinity must vanish")]
    InfinityIrregular,
    #[error("leading coefficient vanishes: {0}")]
    LeadingCoefficientZero(String),
    #[error("X-tilde is singular")]
    SingularXtilde,
    #[error("Sylvester right-hand side for `{param}` is outside range(ad T) (defect {defect:.3e})")]
    NotInRange { param: String, defect: f64 },
    #[error("poles {first} and {second} collide (distance {distance:.3e})")]
    PoleCollision {
        first: String,
        second: String,
        distance: f64,
    },
    #[error("residual `{name}` = {value:.3e} exceeds {limit:.3e} at step {step}")]
    ResidualExceeded {
        name: String,
        value: f64,
        limit: f64,
        step: usize,
    },
    #[error("family has a nonzero irregular type")]
    NotFuchsian,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::NoSolution => "NoSolution",
            Error::ZeroPolynomial => "ZeroPolynomial",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::BadIndex(_) => "BadIndex",
            Error::InvalidInput(_) => "InvalidInput",
            Error::NoMatch(_) => "NoMatch",
            Error::NonResonantRequired => "NonResonantRequired",
            Error::ZeroDimension => "ZeroDimension",
            Error::ReblockFailure(_) => "ReblockFailure",
            Error::NotDefined(_) => "NotDefined",
            Error::SingularLeadingCoefficient => "SingularLeadingCoefficient",
            Error::NotStable => "NotStable",
            Error::ResonantExponent(_) => "ResonantExponent",
            Error::InfinityIrregular => "InfinityIrregular",
            Error::LeadingCoefficientZero(_) => "LeadingCoefficientZero",
            Error::SingularXtilde => "SingularXtilde",
            Error::NotInRange { .. } => "NotInRange",
            Error::PoleCollision { .. } => "PoleCollision",
            Error::ResidualExceeded { .. } => "ResidualExceeded",
            Error::NotFuchsian => "NotFuchsian",
            Error::Parse(_) => "Parse",
        }
    }

    /// Parse failures are I/O-class errors for the CLI; everything else is a
    /// domain error.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
