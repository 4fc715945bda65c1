//! Chain-guided retrieval for multiple-choice question answering.

pub mod amr;
pub mod chains;
pub mod cli;
pub mod corpus;
pub mod dot;
pub mod error;
pub mod explain;
pub mod fixtures;
pub mod gradcheck;
pub mod losses;
pub mod reader;
pub mod retriever;
pub mod semgraph;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
