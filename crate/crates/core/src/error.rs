use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("field has modes up to {support}, above the truncation N = {n}")]
    SupportAboveCutoff { support: usize, n: usize },
    #[error("unknown term id `{0}`")]
    UnknownTerm(String),
    #[error("empty sample set")]
    EmptySamples,
    #[error("least-squares system is rank deficient (null space dimension {nullity})")]
    RankDeficient { nullity: usize },
    #[error("step size underflow at t = {t_reached}")]
    StepUnderflow { t_reached: f64 },
    #[error("convergence probe needs a reference resolution: {0}")]
    NoReference(String),
    #[error("no calibrated energy for index k = {0} (twice the Sobolev order)")]
    MissingEnergy(u32),
    #[error("cost guard: N = {n} exceeds the limit {limit} for this sum")]
    CostGuard { n: usize, limit: usize },
    #[error("regularity s = {s} is not below (k-1)/2 = {bound} for a draw from the k = {k} measure")]
    RegularityTooHigh { s: f64, k: u32, bound: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}

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
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
