//! Neural models: the sequence-to-sequence explanation generator and the
//! encoder-only quality predictors.

pub mod error;
pub mod explainer;
pub mod metric_model;
pub mod nn;
pub mod schedule;
pub mod seq2seq;
pub mod tokenizer;

pub use error::{Error, Result};
