use thiserror::Error;

/// Every failure the library can report.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// which the JSON front end puts in error reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid exponent p = {0}: need 1 < p < inf")]
    InvalidExponent(f64),
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("empty coordinate array")]
    EmptyVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("exponent mismatch: p = {0} vs p = {1}")]
    ExponentMismatch(f64, f64),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid radius r = {0}: need r > 0")]
    InvalidRadius(f64),
    #[error("operation undefined at the zero vector")]
    ZeroVector,
    #[error("operation requires p = 3, got p = {0}")]
    WrongExponent(f64),
    #[error("precondition on the region violated: {0}")]
    InvalidRegion(String),
    #[error("condition (l_3 cylinder) violated: |x| = {norm} > {bound}")]
    ConditionViolated { norm: f64, bound: f64 },
    #[error("point is not on the sphere of radius {r} (|x| = {norm})")]
    NotOnSphere { norm: f64, r: f64 },
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("branch formula holds only for integer p >= 2, got p = {0}")]
    NonIntegerP(f64),
    #[error("point sits on a case boundary of the projection formula: {0}")]
    CaseBoundary(String),
    #[error("point sits on the boundary shell of the set: {0}")]
    OnBoundary(String),
    #[error("projection is not directionally differentiable here: {0}")]
    Nondifferentiable(String),
    #[error("no convergence after {iters} iterations (stationarity {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("finite-difference quotients do not settle (spread {spread:e})")]
    Unstable { spread: f64 },
    #[error("candidate point is not feasible for the set (violation {0:e})")]
    InfeasibleCandidate(f64),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("suite failure: {0}")]
    SuiteFailure(String),
}

impl Error {
    /// Stable identifier used in JSON reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidExponent(_) => "InvalidExponent",
            Error::NonFinite(_) => "NonFinite",
            Error::EmptyVector => "EmptyVector",
            Error::DimensionMismatch(..) => "DimensionMismatch",
            Error::ExponentMismatch(..) => "ExponentMismatch",
            Error::InvalidMask(_) => "InvalidMask",
            Error::InvalidRadius(_) => "InvalidRadius",
            Error::ZeroVector => "ZeroVector",
            Error::WrongExponent(_) => "WrongExponent",
            Error::InvalidRegion(_) => "InvalidRegion",
            Error::ConditionViolated { .. } => "ConditionViolated",
            Error::NotOnSphere { .. } => "NotOnSphere",
            Error::ZeroDirection => "ZeroDirection",
            Error::NonIntegerP(_) => "NonIntegerP",
            Error::CaseBoundary(_) => "CaseBoundary",
            Error::OnBoundary(_) => "OnBoundary",
            Error::Nondifferentiable(_) => "Nondifferentiable",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::Unstable { .. } => "Unstable",
            Error::InfeasibleCandidate(_) => "InfeasibleCandidate",
            Error::Schema(_) => "SchemaError",
            Error::SuiteFailure(_) => "SuiteFailure",
        }
    }

    /// Errors after which a caller may fall back to an oracle instead of
    /// giving up.
    pub fn allows_fallback(&self) -> bool {
        matches!(
            self,
            Error::NonIntegerP(_)
                | Error::CaseBoundary(_)
                | Error::OnBoundary(_)
                | Error::ConditionViolated { .. }
        )
    }

    /// Input problems: schema and validation failures.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::InvalidExponent(_)
                | Error::NonFinite(_)
                | Error::EmptyVector
                | Error::DimensionMismatch(..)
                | Error::ExponentMismatch(..)
                | Error::InvalidMask(_)
                | Error::InvalidRadius(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
