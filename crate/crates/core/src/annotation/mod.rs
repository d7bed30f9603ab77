//! Annotation judgments: agreement, filtering, tie adjudication,
//! aggregation and export for metric learning.

pub mod adjudicate;
pub mod aggregate;
pub mod agreement;
pub mod export;
pub mod filter;
pub mod judgment;
#[cfg(test)]
pub(crate) mod testutil;

pub use adjudicate::{
    adjudicate_tie, adjudicate_ties, AdjudicationRecord, Adjudicator, AdjudicatorBackend, FixtureAdjudicator,
};
pub use aggregate::{aggregate, find_ties, AggregateReport, AggregatedLabel};
pub use agreement::{compute_agreement, perfect_partial_agreement, AgreementProfile};
pub use export::{export_metric_dataset, MetricExample, MetricSplit};
pub use filter::{filter_annotators, FilterMode, FilteredPool};
pub use judgment::{Dimension, JudgmentRecord, SummaryContext};
