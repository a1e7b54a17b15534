use thiserror::Error;

use crate::profiles::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent p = {p} out of range for N = {dim} (need 2 < p < {upper})")]
    ExponentOutOfRange { dim: usize, p: f64, upper: f64 },

    #[error(
        "shooting bracket [{low}, {high}] does not separate behaviours: low -> {low_class:?}, high -> {high_class:?}"
    )]
    BracketNotFound {
        low: f64,
        high: f64,
        low_class: Trajectory,
        high_class: Trajectory,
    },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("iterate lost positivity (damping fell to {damping:e})")]
    NegativeDip { damping: f64 },

    #[error("solver failed at delta = {delta}: {source}")]
    AtDelta { delta: f64, source: Box<Error> },

    #[error("no root of G in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("no root of g_eps for eps = {epsilon}: g_eps stays positive up to delta = {delta_cap}")]
    NoSignChange { epsilon: f64, delta_cap: f64 },

    #[error("g_eps({delta}) = {value:e} < 0 although delta = sqrt(m0)*eps; declared m0 is not a lower bound of M")]
    LowerBoundViolated { delta: f64, value: f64 },

    #[error("cannot derive K0: M(K^(N-2) A)/K^2 >= 1 for every K up to {k_max}")]
    NoScanCap { k_max: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("entry {index} has no delta_eps")]
    MissingDelta { index: usize },

    #[error("quadrature window too small: relative tail mass {tail:e}")]
    QuadratureWindow { tail: f64 },

    #[error("decay fit range is empty")]
    FitRangeEmpty,

    #[error("peaks merged: found {found} maxima, expected {expected}")]
    PeakMerge { found: usize, expected: usize },

    #[error("point {point:?} is not a critical point of V (|grad V| = {gradient:e})")]
    NotCritical { point: Vec<f64>, gradient: f64 },

    #[error("correction undefined: solution was not polished")]
    Unpolished,

    #[error("unsupported dimension N = {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("Gagliardo-Nirenberg battery failed: test {index} ratio {ratio} exceeds C = {constant}")]
    GnBattery {
        index: usize,
        ratio: f64,
        constant: f64,
    },

    #[error("expression error: {0}")]
    Expression(String),
}

impl Error {
    /// Stable snake_case name of the variant, used in run manifests.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ExponentOutOfRange { .. } => "exponent_out_of_range",
            Error::BracketNotFound { .. } => "bracket_not_found",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NegativeDip { .. } => "negative_dip",
            Error::AtDelta { source, .. } => source.kind(),
            Error::NoRootInBracket { .. } => "no_root_in_bracket",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::LowerBoundViolated { .. } => "lower_bound_violated",
            Error::NoScanCap { .. } => "no_scan_cap",
            Error::Empty(_) => "empty",
            Error::MissingDelta { .. } => "missing_delta",
            Error::QuadratureWindow { .. } => "quadrature_window",
            Error::FitRangeEmpty => "fit_range_empty",
            Error::PeakMerge { .. } => "peak_merge",
            Error::NotCritical { .. } => "not_critical",
            Error::Unpolished => "unpolished",
            Error::UnsupportedDimension(_) => "unsupported_dimension",
            Error::Hypothesis(_) => "hypothesis",
            Error::GnBattery { .. } => "gn_battery",
            Error::Expression(_) => "expression",
        }
    }

    pub(crate) fn at_delta(delta: f64, source: Error) -> Self {
        if matches!(source, Error::AtDelta { delta: d, .. } if d == delta) {
            return source;
        }
        Error::AtDelta {
            delta,
            source: Box::new(source),
        }
    }
}
