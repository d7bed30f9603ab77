//! ROUGE-N and ROUGE-L F-measures.
//!
//! Preprocessing: lowercase, every non-alphanumeric character becomes a
//! space, then whitespace split. No stemming and no stop-word removal, so
//! scores can drift by about a point against stemmed ROUGE variants.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// Lowercases, strips punctuation (Unicode aware) and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    const ZERO: Prf = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_overlap(overlap: usize, candidate_len: usize, reference_len: usize) -> Prf {
        if candidate_len == 0 || reference_len == 0 {
            return Prf::ZERO;
        }
        let precision = overlap as f64 / candidate_len as f64;
        let recall = overlap as f64 / reference_len as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap between two token sequences.
pub fn rouge_n_tokens(candidate: &[String], reference: &[String], n: usize) -> Prf {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap: usize = cand
        .iter()
        .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    Prf::from_overlap(overlap, cand_total, ref_total)
}

/// ROUGE-N F1 in `[0, 1]`. Any empty side scores 0.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    rouge_n_tokens(&tokenize(candidate), &tokenize(reference), n).f1
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> Prf {
    Prf::from_overlap(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// Sentence-level ROUGE-L F1 in `[0, 1]`.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference)).f1
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(default)]
    pub claim: String,
    pub prediction: String,
    pub reference: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleRouge {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

impl ExampleRouge {
    pub fn score(candidate: &str, reference: &str) -> Self {
        let c = tokenize(candidate);
        let r = tokenize(reference);
        ExampleRouge {
            rouge1: rouge_n_tokens(&c, &r, 1).f1,
            rouge2: rouge_n_tokens(&c, &r, 2).f1,
            rouge_l: rouge_l_tokens(&c, &r).f1,
        }
    }
}

/// Corpus scores on the 0-100 scale plus the per-example F1 values they
/// were averaged from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
    pub ids: Vec<String>,
    pub per_example: Vec<ExampleRouge>,
}

impl RougeScore {
    pub fn n(&self) -> usize {
        self.per_example.len()
    }

    pub fn rouge1_series(&self) -> Vec<f64> {
        self.per_example.iter().map(|e| e.rouge1).collect()
    }

    pub fn rouge2_series(&self) -> Vec<f64> {
        self.per_example.iter().map(|e| e.rouge2).collect()
    }

    pub fn rouge_l_series(&self) -> Vec<f64> {
        self.per_example.iter().map(|e| e.rouge_l).collect()
    }
}

pub fn score_predictions(predictions: &[Prediction]) -> Result<RougeScore> {
    if predictions.is_empty() {
        return Err(Error::InvalidInput(
            "cannot score an empty predictions set".into(),
        ));
    }
    let per_example: Vec<ExampleRouge> = predictions
        .iter()
        .map(|p| ExampleRouge::score(&p.prediction, &p.reference))
        .collect();
    let n = per_example.len() as f64;
    let mean = |f: fn(&ExampleRouge) -> f64| per_example.iter().map(f).sum::<f64>() / n * 100.0;
    Ok(RougeScore {
        rouge1_f: mean(|e| e.rouge1),
        rouge2_f: mean(|e| e.rouge2),
        rouge_l_f: mean(|e| e.rouge_l),
        ids: predictions.iter().map(|p| p.id.clone()).collect(),
        per_example,
    })
}

/// Scores a predictions JSONL file (`{id, claim, prediction, reference}`).
pub fn corpus_rouge(predictions_file: impl AsRef<Path>) -> Result<RougeScore> {
    let predictions: Vec<Prediction> = jsonl::read(predictions_file.as_ref())?;
    score_predictions(&predictions)
}

/// Summary document written by the `score` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeReport {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub n: usize,
    pub per_example_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerExampleLine {
    pub id: String,
    #[serde(flatten)]
    pub scores: ExampleRouge,
}
