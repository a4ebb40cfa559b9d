use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("dimension mismatch: expected {expected} scores, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("score vector must have at least one entry")]
    EmptyVector,

    #[error("non-finite score at position {index} of instance '{id}'")]
    NonFinite { id: String, index: usize },

    #[error("empty {0} class")]
    EmptyClass(&'static str),

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for {len} classifiers")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("average precision is undefined without a positive label")]
    NoPositives,

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("non-finite gradient in {branch} branch at iteration {iteration}")]
    NonFiniteGradient { branch: &'static str, iteration: usize },
}

pub type Result<T, E = FusionError> = std::result::Result<T, E>;
