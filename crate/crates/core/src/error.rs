use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("inheritance cycle through {0}")]
    InheritanceCycle(String),
    #[error("model invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no parseable java files for project {project} under {roots:?}")]
    NoParseableFiles { project: String, roots: Vec<PathBuf> },
    #[error("corpus root does not exist: {0}")]
    MissingRoot(PathBuf),
    #[error("invalid exclude glob {glob:?}: {message}")]
    BadGlob { glob: String, message: String },
    #[error("parse error in {path} at {line}:{column}")]
    Syntax { path: String, line: usize, column: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupingError {
    #[error("long method original candidate without an advisor verdict")]
    MissingAdvisor,
    #[error("advisor verdict present on a candidate that must not carry one")]
    UnexpectedAdvisor,
    #[error("generated candidate without ground truth")]
    MissingGroundTruth,
    #[error("candidate metrics do not match its smell: {0}")]
    Metrics(String),
}
