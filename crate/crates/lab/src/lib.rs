//! Lower-bound constructions made executable: query templates, set-family
//! encodings, the zero-clique to set-intersection reduction, and instance
//! generators.

pub mod clique;
pub mod field;
pub mod generate;
pub mod reduction;
pub mod setfamily;
pub mod templates;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid graph input at line {line}: {message}")]
    Graph { line: usize, message: String },
    #[error("query tuple has {found} indices, expected {expected}")]
    Arity { expected: usize, found: usize },
    #[error(transparent)]
    Query(#[from] lexjoin::query::QueryError),
    #[error(transparent)]
    Storage(#[from] lexjoin::storage::StorageError),
    #[error(transparent)]
    Access(#[from] lexjoin::access::AccessError),
    #[error("cannot write {path}: {message}")]
    Output { path: std::path::PathBuf, message: String },
}

pub(crate) fn parameter(msg: impl Into<String>) -> LabError {
    LabError::Parameter(msg.into())
}
