use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported assumption `{0}`")]
    UnsupportedAssumption(String),

    #[error("assumption {assumption} is inapplicable: {reason}")]
    Inapplicable { assumption: String, reason: String },

    #[error("invalid truncation radius {0} (must be > 0)")]
    InvalidRadius(f64),

    #[error("inadmissible gauge: {constraint} violated (value {value})")]
    InadmissibleGauge {
        constraint: &'static str,
        value: f64,
    },

    #[error("value {value} is below the bound function's floor f(0) = {floor}")]
    BelowDomain { value: f64, floor: f64 },

    #[error("no bracket found for f(r) = {0} within 1024 doublings")]
    UnboundedSearch(f64),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid increment: expected dimension {expected}, got {got}")]
    InvalidIncrement { expected: usize, got: usize },

    #[error("invalid intensity {0} (must be finite and >= 0)")]
    InvalidIntensity(f64),

    #[error("numerical blow-up at step k = {step}{}", location(.level, .path))]
    NumericalBlowup {
        step: i64,
        level: Option<usize>,
        path: Option<u64>,
    },

    #[error("rate not fittable: {0}")]
    NotFittable(String),
}

fn location(level: &Option<usize>, path: &Option<u64>) -> String {
    match (level, path) {
        (Some(m), Some(i)) => format!(" (level m = {m}, path {i})"),
        (Some(m), None) => format!(" (level m = {m})"),
        (None, Some(i)) => format!(" (path {i})"),
        (None, None) => String::new(),
    }
}

impl Error {
    /// True for errors caused by bad inputs, detectable before any simulation
    /// work starts. Everything else is a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NumericalBlowup { .. } | Error::NotFittable(_))
    }

    pub(crate) fn at(self, level: usize, path: u64) -> Self {
        match self {
            Error::NumericalBlowup { step, .. } => Error::NumericalBlowup {
                step,
                level: Some(level),
                path: Some(path),
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
