//! Core building blocks for the fact-check explanation workbench: corpus
//! ingestion, dataset assembly, ROUGE scoring, annotation agreement and
//! aggregation, metrics and significance testing.

pub mod annotation;
pub mod dataset;
pub mod error;
pub mod ingest;
pub mod jsonl;
pub mod metrics;
pub mod rouge;
pub mod significance;
pub mod stats;
pub mod topics;

pub use error::{Error, Result};
