use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-factorable set `{0}`: supply an explicit projection")]
    NonFactorable(String),
    #[error("nonsmooth corner unsupported at {x:?} (constraint `{constraint}` has vanishing gradient)")]
    NonsmoothCorner { x: Vec<f64>, constraint: String },
    #[error("point {0:?} is not in the set")]
    NotInSet(Vec<f64>),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
    #[error("initial state {0:?} is outside closure(Pi_c) and Pi_d")]
    InvalidInitialState(Vec<f64>),
    #[error("regulation map empty at x = {0:?}")]
    RegulationEmpty(Vec<f64>),
    #[error("w = 0 is not admissible at x = {0:?}")]
    ZeroDisturbanceInadmissible(Vec<f64>),
    #[error("certificate not verified: {0}")]
    NotVerified(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
