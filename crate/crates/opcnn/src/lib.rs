//! Word order-preserving CNN (OPCNN) for short-text deceptive-opinion
//! classification, built from scratch: dense tensor substrate, hand-derived
//! backpropagation verified by finite differences, classical tf-idf/bigram
//! SVM baselines, and the evaluation-metric suite.

pub mod baselines;
pub mod corpus;
pub mod metrics;
pub mod nn;
pub mod seeds;
pub mod tensor;
pub mod train;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
