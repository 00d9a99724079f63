use alloc::boxed::Box;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid bounds: lower {lower} must be strictly below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("numerically degenerate interval ({lower}, {upper}): acceptance probability underflows")]
    Degenerate { lower: f64, upper: f64 },

    #[error("quadrature did not converge on ({lower}, {upper}) after {evaluations} evaluations")]
    QuadratureNonConvergence {
        lower: f64,
        upper: f64,
        evaluations: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("direction is not a unit vector (norm {norm})")]
    NonUnitDirection { norm: f64 },

    #[error("verifier accepted fewer than the requested samples after {attempts} attempts")]
    MaxAttemptsExceeded { attempts: u64 },

    #[error("design matrix is rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("need at least {needed} usable rounds, found {found}")]
    InsufficientRounds { needed: usize, found: usize },

    #[error("stream index `{field}` = {value} exceeds the maximum {max}")]
    SeedSpaceExhausted {
        field: &'static str,
        value: u64,
        max: u64,
    },

    #[error("round {round}{}: {source}", direction.map(|d| alloc::format!(", direction {d}")).unwrap_or_default())]
    AtRound {
        round: usize,
        direction: Option<usize>,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }

    pub(crate) fn at_round(self, round: usize, direction: Option<usize>) -> Self {
        Error::AtRound {
            round,
            direction,
            source: Box::new(self),
        }
    }

    /// The innermost error, with round/direction context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtRound { source, .. } => source.root(),
            other => other,
        }
    }
}
