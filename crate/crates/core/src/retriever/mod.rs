//! Dense iterative retrieval: exact inner-product search over a fixed
//! evidence index, query reformulation by concatenation, and beam search
//! over several retrieval steps.

mod beam;
mod encoder;
mod index;
pub mod embeddings;

use thiserror::Error;

use crate::corpus::FactId;

pub use beam::{reformulate, retrieve, BeamRanking, EvidencePool, QueryState, Retrieval, RetrieveConfig, SEP};
pub use encoder::{tokenize, FileEncoder, HashingEncoder, QueryEncoder, SparseGrad, TokenBag};
pub use index::{dot, score, top_k, VectorIndex};

/// Parameters of the trainable query encoder.
pub type EncoderParams = HashingEncoder;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("hypothesis is empty")]
    EmptyHypothesis,
    #[error("unknown fact {0}")]
    UnknownFact(FactId),
    #[error("no embedding for query {0:?}")]
    UnknownQuery(String),
    #[error("duplicate fact {0} in index")]
    DuplicateFact(FactId),
    #[error("beam size and step count must be at least 1")]
    BadBeamConfig,
}
