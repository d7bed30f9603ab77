use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::judgment::{Dimension, JudgmentRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementProfile {
    pub annotator_id: String,
    /// Mean peer agreement over all binary cells; `None` when the annotator
    /// shares no summary with anyone.
    pub overall_agreement: Option<f64>,
    pub per_question_agreement: BTreeMap<Dimension, f64>,
    /// Number of (summary, dimension) cells with at least one peer.
    pub cells: usize,
}

/// First judgment per (summary, annotator), grouped by summary.
pub(crate) fn by_summary(judgments: &[JudgmentRecord]) -> BTreeMap<&str, Vec<&JudgmentRecord>> {
    let mut groups: BTreeMap<&str, Vec<&JudgmentRecord>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for j in judgments {
        if !seen.insert((j.summary_id.as_str(), j.annotator_id.as_str())) {
            tracing::warn!(summary = %j.summary_id, annotator = %j.annotator_id, "ignoring repeated judgment");
            continue;
        }
        groups.entry(j.summary_id.as_str()).or_default().push(j);
    }
    groups
}

/// Simple-accuracy agreement: on each (summary, binary dimension) cell an
/// annotator scores the fraction of peers on that summary who gave the same
/// answer. Overall agreement is the mean over all cells; per-question
/// agreement restricts the mean to one dimension.
pub fn compute_agreement(judgments: &[JudgmentRecord]) -> Vec<AgreementProfile> {
    let mut sums: BTreeMap<&str, BTreeMap<Dimension, (f64, usize)>> = BTreeMap::new();
    for group in by_summary(judgments).values() {
        for j in group {
            let entry = sums.entry(j.annotator_id.as_str()).or_default();
            let peers: Vec<&&JudgmentRecord> = group
                .iter()
                .filter(|p| p.annotator_id != j.annotator_id)
                .collect();
            if peers.is_empty() {
                continue;
            }
            for dim in Dimension::BINARY {
                let mine = j.answer(dim);
                let same = peers.iter().filter(|p| p.answer(dim) == mine).count();
                let cell = entry.entry(dim).or_insert((0.0, 0));
                cell.0 += same as f64 / peers.len() as f64;
                cell.1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(annotator, dims)| {
            let total: f64 = dims.values().map(|(s, _)| s).sum();
            let cells: usize = dims.values().map(|(_, n)| n).sum();
            AgreementProfile {
                annotator_id: annotator.to_string(),
                overall_agreement: (cells > 0).then(|| total / cells as f64),
                per_question_agreement: dims.into_iter().map(|(d, (s, n))| (d, s / n as f64)).collect(),
                cells,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectPartial {
    pub perfect: f64,
    pub partial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectPartialTable {
    pub per_dimension: BTreeMap<Dimension, PerfectPartial>,
    pub summaries: usize,
    /// Summaries without exactly three judgments.
    pub excluded: usize,
}

/// Share of summaries where all three annotators agree (perfect) and where
/// exactly two agree (partial), per binary dimension.
pub fn perfect_partial_agreement(judgments: &[JudgmentRecord]) -> PerfectPartialTable {
    let groups = by_summary(judgments);
    let triples: Vec<&Vec<&JudgmentRecord>> = groups.values().filter(|g| g.len() == 3).collect();
    let excluded = groups.len() - triples.len();
    let n = triples.len();
    let per_dimension = Dimension::BINARY
        .into_iter()
        .map(|dim| {
            let perfect = triples
                .iter()
                .filter(|g| g.iter().all(|j| j.answer(dim) == g[0].answer(dim)))
                .count();
            let share = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
            (
                dim,
                PerfectPartial {
                    perfect: share(perfect),
                    partial: share(n - perfect),
                },
            )
        })
        .collect();
    PerfectPartialTable {
        per_dimension,
        summaries: n,
        excluded,
    }
}
