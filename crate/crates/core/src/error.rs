use thiserror::Error;

pub type Result<T> = std::result::Result<T, SepError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SepError {
    #[error("invalid environment law: {0}")]
    InvalidLaw(String),
    #[error("law support touches 0; E[(1-w)/w] diverges")]
    DivergentExpectation,
    #[error("law is not ballistic: E[(1-w)/w] = {0} >= 1")]
    NotBallistic(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("site {site} outside environment window [{first}, {last}]")]
    SiteOutOfWindow { site: i64, first: i64, last: i64 },
    #[error("configuration mismatch: {0}")]
    Mismatch(String),
    #[error("state space C({n},{k}) = {size} exceeds cap {cap}")]
    CapExceeded { n: usize, k: usize, size: u128, cap: usize },
    #[error("requested time {requested} exceeds event stream horizon {horizon}")]
    HorizonExceeded { requested: f64, horizon: f64 },
    #[error("event stream does not cover sites [{first}, {last}]")]
    StreamCoverage { first: i64, last: i64 },
    #[error("horizon too short: {censored} of {replicas} replicas unresolved; censored quantile {censored_quantile}")]
    HorizonTooShort { censored: usize, replicas: usize, censored_quantile: f64 },
    #[error("boundary touched in {touched} of {replicas} replicas (budget {budget})")]
    BoundaryTouched { touched: usize, replicas: usize, budget: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SepError {
    fn from(e: std::io::Error) -> Self {
        SepError::Io(e.to_string())
    }
}

impl From<csv::Error> for SepError {
    fn from(e: csv::Error) -> Self {
        SepError::Io(e.to_string())
    }
}
