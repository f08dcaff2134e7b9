use thiserror::Error;

/// Errors raised by the laboratory's operations.
///
/// Runtime breakdowns of the nonlinear solver are *not* errors; they are
/// reported as [`crate::nonlinear_solver::BreakdownInfo`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time: {0}")]
    InvalidTime(String),
    #[error("data not evaluable: {0}")]
    DataNotEvaluable(String),
    #[error("data outside class (H): {0}")]
    DataOutsideClass(String),
    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),
    #[error("oracle horizon exceeded: requested T = {requested}, valid horizon = {valid}")]
    OracleHorizonExceeded { requested: f64, valid: f64 },
    #[error("outside light-cone configuration: t = {t}, |x| = {absx}, r = {r}")]
    OutsideLightCone { t: f64, absx: f64, r: f64 },
    #[error("decay exponent out of range: k = {0} (need k > 1)")]
    DecayExponentOutOfRange(f64),
    #[error("empty sample: {0}")]
    EmptySample(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("missing time-derivative channel: {0}")]
    MissingTimeDerivative(String),
    #[error("multi-index order {order} exceeds cap {cap}")]
    OrderCapExceeded { order: usize, cap: usize },
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time grid does not cover [0, {0}]")]
    TimeGridNotCovering(f64),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
