use thiserror::Error;

use crate::amr::AmrError;
use crate::losses::LossError;
use crate::retriever::RetrievalError;
use crate::semgraph::SemGraphError;

/// Problems with input files and records.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("{context}: {source}")]
    Amr {
        context: String,
        #[source]
        source: AmrError,
    },
    #[error("bad embedding file: {0}")]
    Embeddings(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Amr(#[from] AmrError),
    #[error(transparent)]
    Graph(#[from] SemGraphError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("config: {0}")]
    Config(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("instance {id}: {source}")]
    Instance {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_instance(self, id: &str) -> Error {
        match self {
            e @ Error::Instance { .. } => e,
            e => Error::Instance {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error with instance context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Instance { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
