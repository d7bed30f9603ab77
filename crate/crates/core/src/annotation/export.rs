use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::AggregatedLabel;
use super::judgment::{Dimension, SummaryContext};
use crate::dataset::split::shuffled_indices;
use crate::error::{Error, Result};

/// One metric-learning example: the model input text and every label the
/// summary received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricExample {
    pub id: String,
    pub text: String,
    pub labels: BTreeMap<Dimension, bool>,
    pub quality: Option<f64>,
}

impl MetricExample {
    pub fn target(&self, dim: Dimension) -> Option<f64> {
        match dim {
            Dimension::Quality => self.quality,
            d => self.labels.get(&d).map(|&b| if b { 1.0 } else { 0.0 }),
        }
    }
}

/// Claim, verdict and explanation joined by newlines.
pub fn metric_input(ctx: &SummaryContext) -> String {
    format!("{}\n{}\n{}", ctx.claim, ctx.verdict, ctx.explanation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSplit {
    pub train: Vec<MetricExample>,
    pub eval: Vec<MetricExample>,
}

/// Seeded train/eval split of the aggregated labels. Labels are ordered by
/// summary id before shuffling, so input order does not matter. Labels past
/// `train + eval` are left out.
pub fn export_metric_dataset(
    labels: &[AggregatedLabel],
    summaries: &HashMap<String, SummaryContext>,
    train: usize,
    eval: usize,
    seed: u64,
) -> Result<MetricSplit> {
    let needed = train + eval;
    if labels.len() < needed {
        return Err(Error::InvalidInput(format!(
            "{} labels cannot fill {train} training and {eval} evaluation examples",
            labels.len()
        )));
    }
    let mut sorted: Vec<&AggregatedLabel> = labels.iter().collect();
    sorted.sort_by(|a, b| a.summary_id.cmp(&b.summary_id));
    let mut examples = Vec::with_capacity(needed);
    for i in shuffled_indices(sorted.len(), seed).into_iter().take(needed) {
        let label = sorted[i];
        let ctx = summaries
            .get(&label.summary_id)
            .ok_or_else(|| Error::InvalidInput(format!("no summary context for {}", label.summary_id)))?;
        examples.push(MetricExample {
            id: label.summary_id.clone(),
            text: metric_input(ctx),
            labels: label.binary_labels.clone(),
            quality: label.quality_score,
        });
    }
    let eval_part = examples.split_off(train);
    Ok(MetricSplit {
        train: examples,
        eval: eval_part,
    })
}

pub fn write_metric_split(split: &MetricSplit, dir: &Path) -> Result<()> {
    crate::jsonl::write(dir.join("train.jsonl"), &split.train)?;
    crate::jsonl::write(dir.join("eval.jsonl"), &split.eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn fixture(n: usize) -> (Vec<AggregatedLabel>, HashMap<String, SummaryContext>) {
        let labels = (0..n)
            .map(|i| AggregatedLabel {
                summary_id: format!("s{i:02}"),
                binary_labels: BTreeMap::from([(Dimension::Hallucination, i % 2 == 0)]),
                quality_score: Some(0.5),
                tie_broken_by_adjudicator: BTreeSet::new(),
            })
            .collect();
        let summaries = (0..n)
            .map(|i| {
                let id = format!("s{i:02}");
                let ctx = SummaryContext {
                    summary_id: id.clone(),
                    claim: format!("claim {i}"),
                    verdict: "False.".into(),
                    article: String::new(),
                    explanation: format!("explanation {i}"),
                };
                (id, ctx)
            })
            .collect();
        (labels, summaries)
    }

    #[test]
    fn ten_labels_eight_two() {
        let (labels, summaries) = fixture(10);
        let a = export_metric_dataset(&labels, &summaries, 8, 2, 5).unwrap();
        assert_eq!((a.train.len(), a.eval.len()), (8, 2));
        let mut reversed = labels.clone();
        reversed.reverse();
        let b = export_metric_dataset(&reversed, &summaries, 8, 2, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train[0].text.lines().count(), 3);
        assert!(a.train[0].text.starts_with("claim "));
    }

    #[test]
    fn insufficient_labels() {
        let (labels, summaries) = fixture(3);
        let err = export_metric_dataset(&labels, &summaries, 3, 1, 0).unwrap_err();
        assert!(err.to_string().contains("3 labels"));
    }

    #[test]
    fn targets() {
        let (labels, summaries) = fixture(2);
        let split = export_metric_dataset(&labels, &summaries, 2, 0, 0).unwrap();
        let ex = split.train.iter().find(|e| e.id == "s00").unwrap();
        assert_eq!(ex.target(Dimension::Hallucination), Some(1.0));
        assert_eq!(ex.target(Dimension::Quality), Some(0.5));
        assert_eq!(ex.target(Dimension::Convincingness), None);
    }
}
