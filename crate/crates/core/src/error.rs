use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid alignment: {0}")]
    Alignment(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("index out of range: {0}")]
    Range(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cost estimate {estimate:.3e} exceeds cap {cap:.3e}")]
    CostCap { estimate: f64, cap: f64 },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("bandwidth: {0}")]
    Bandwidth(String),
    #[error("wrong symbol type: {0}")]
    Type(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("empty family: {0}")]
    EmptyFamily(String),
}
