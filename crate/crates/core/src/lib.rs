//! Core of the code-smell dataset generator: program model, Java ingestion,
//! metrics, smell generators, grouping, persistence and the review queue.

pub mod error;
pub mod generators;
pub mod grouping;
pub mod java;
pub mod lexer;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod review;
pub mod sample;
pub mod store;

pub use error::{GroupingError, IngestError, ModelError, StoreError};
