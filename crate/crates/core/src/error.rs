use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {x} lies outside the path domain [0, {end}]")]
    OutOfDomain { x: f64, end: f64 },

    #[error("inner path reaches {value}, outside the outer domain [0, {end}]")]
    RangeExceedsDomain { value: f64, end: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid noise specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("noise trajectory cannot be extended to {requested} (available up to {available})")]
    NoiseExhausted { requested: f64, available: f64 },

    #[error("solver state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("path is not strictly increasing near node {index}")]
    NotBijective { index: usize },

    #[error("argument {0} is outside the distribution support")]
    DomainError(f64),

    #[error("sample is empty")]
    EmptySample,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by user-supplied parameters rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidConfig(_)
                | Error::InvalidPath(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}
