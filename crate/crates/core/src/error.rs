use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("number {n} outside the number line [{lo}, {hi}]")]
    NumberOutOfRange { n: i64, lo: i64, hi: i64 },
    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error("not a probability distribution: {0}")]
    NotNormalized(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("power-law fit needs at least two positive counts, got {0}")]
    Fit(usize),
    #[error("word frequencies are infeasible for this naming (max residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
