use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::adjudicate::AdjudicationRecord;
use super::agreement::by_summary;
use super::filter::FilteredPool;
use super::judgment::Dimension;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedLabel {
    pub summary_id: String,
    /// Labels for binary dimensions that reached a decision.
    pub binary_labels: BTreeMap<Dimension, bool>,
    pub quality_score: Option<f64>,
    pub tie_broken_by_adjudicator: BTreeSet<Dimension>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateReport {
    pub labels: Vec<AggregatedLabel>,
    /// Ties left open per dimension; those summaries lack that label.
    pub unresolved_ties: BTreeMap<Dimension, usize>,
}

enum Vote {
    Decided(bool),
    Tie,
}

fn majority(answers: impl Iterator<Item = bool>) -> Option<Vote> {
    let (mut yes, mut no) = (0usize, 0usize);
    for a in answers {
        if a {
            yes += 1;
        } else {
            no += 1;
        }
    }
    match yes.cmp(&no) {
        _ if yes + no == 0 => None,
        std::cmp::Ordering::Greater => Some(Vote::Decided(true)),
        std::cmp::Ordering::Less => Some(Vote::Decided(false)),
        std::cmp::Ordering::Equal => Some(Vote::Tie),
    }
}

/// (summary, dimension) pairs with an even split on an objective dimension,
/// in summary order.
pub fn find_ties(pool: &FilteredPool) -> Vec<(String, Dimension)> {
    let mut ties = Vec::new();
    for dim in Dimension::BINARY.into_iter().filter(|d| d.is_objective()) {
        for (summary, group) in by_summary(pool.judgments(dim)) {
            if let Some(Vote::Tie) = majority(group.iter().filter_map(|j| j.answer(dim))) {
                ties.push((summary.to_string(), dim));
            }
        }
    }
    ties.sort();
    ties
}

fn slot<'a>(labels: &'a mut BTreeMap<String, AggregatedLabel>, summary: &str) -> &'a mut AggregatedLabel {
    labels
        .entry(summary.to_string())
        .or_insert_with(|| AggregatedLabel {
            summary_id: summary.to_string(),
            binary_labels: BTreeMap::new(),
            quality_score: None,
            tie_broken_by_adjudicator: BTreeSet::new(),
        })
}

/// Majority vote per binary dimension with adjudicated ties on objective
/// dimensions, plus the mean quality rating. When several adjudication
/// records exist for one tie the last one counts.
pub fn aggregate(pool: &FilteredPool, adjudications: &[AdjudicationRecord]) -> AggregateReport {
    let decided: HashMap<(&str, Dimension), Option<bool>> = adjudications
        .iter()
        .map(|a| ((a.summary_id.as_str(), a.dimension), a.outcome))
        .collect();
    let mut labels: BTreeMap<String, AggregatedLabel> = BTreeMap::new();
    let mut report = AggregateReport::default();
    for dim in Dimension::BINARY {
        for (summary, group) in by_summary(pool.judgments(dim)) {
            match majority(group.iter().filter_map(|j| j.answer(dim))) {
                Some(Vote::Decided(b)) => {
                    slot(&mut labels, summary).binary_labels.insert(dim, b);
                }
                Some(Vote::Tie) => {
                    let outcome = dim
                        .is_objective()
                        .then(|| decided.get(&(summary, dim)).copied().flatten())
                        .flatten();
                    let label = slot(&mut labels, summary);
                    match outcome {
                        Some(b) => {
                            label.binary_labels.insert(dim, b);
                            label.tie_broken_by_adjudicator.insert(dim);
                        }
                        None => *report.unresolved_ties.entry(dim).or_insert(0) += 1,
                    }
                }
                None => {}
            }
        }
    }
    for (summary, group) in by_summary(pool.judgments(Dimension::Quality)) {
        let mut values: Vec<f64> = group.iter().map(|j| j.overall_quality).collect();
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        slot(&mut labels, summary).quality_score = Some(mean);
    }
    report.labels = labels.into_values().collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::judgment::JudgmentRecord;
    use crate::annotation::testutil::j;
    use proptest::prelude::*;

    fn keep_all(pool: &[JudgmentRecord]) -> FilteredPool {
        FilteredPool {
            kept: Dimension::ALL.into_iter().map(|d| (d, pool.to_vec())).collect(),
            ..Default::default()
        }
    }

    fn adj(summary: &str, dim: Dimension, outcome: Option<bool>) -> AdjudicationRecord {
        AdjudicationRecord {
            summary_id: summary.into(),
            dimension: dim,
            prompt_sha256: String::new(),
            response: outcome.map(|b| if b { "yes".into() } else { "no".into() }),
            outcome,
            error: None,
        }
    }

    #[test]
    fn majority_and_mean() {
        let pool = keep_all(&[
            j("s", "A", [true; 4], 0.6),
            j("s", "B", [true; 4], 0.8),
            j("s", "C", [false; 4], 1.0),
        ]);
        let out = aggregate(&pool, &[]);
        let label = &out.labels[0];
        assert!(label.binary_labels.values().all(|&b| b));
        assert!((label.quality_score.unwrap() - 0.8).abs() < 1e-12);
        assert!(label.tie_broken_by_adjudicator.is_empty());
    }

    #[test]
    fn tie_uses_adjudicator_on_objective_only() {
        let pool = keep_all(&[j("s", "A", [true; 4], 0.5), j("s", "B", [false; 4], 0.5)]);
        let ties = find_ties(&pool);
        assert_eq!(ties.len(), 3);
        let out = aggregate(&pool, &[adj("s", Dimension::Hallucination, Some(false))]);
        let label = &out.labels[0];
        assert_eq!(label.binary_labels.get(&Dimension::Hallucination), Some(&false));
        assert_eq!(
            label.tie_broken_by_adjudicator,
            BTreeSet::from([Dimension::Hallucination])
        );
        assert!(!label.binary_labels.contains_key(&Dimension::Convincingness));
        assert!(!label.binary_labels.contains_key(&Dimension::ArticleContradiction));
        assert_eq!(out.unresolved_ties[&Dimension::ArticleContradiction], 1);
        assert_eq!(out.unresolved_ties[&Dimension::Convincingness], 1);
    }

    #[test]
    fn failed_adjudication_leaves_tie_open() {
        let pool = keep_all(&[j("s", "A", [true; 4], 0.5), j("s", "B", [false; 4], 0.5)]);
        let out = aggregate(&pool, &[adj("s", Dimension::SelfContradiction, None)]);
        assert!(!out.labels[0]
            .binary_labels
            .contains_key(&Dimension::SelfContradiction));
        assert_eq!(out.unresolved_ties[&Dimension::SelfContradiction], 1);
    }

    fn arb_pool() -> impl Strategy<Value = Vec<JudgmentRecord>> {
        prop::collection::vec((0usize..6, any::<[bool; 4]>(), 0u8..=4), 1..30).prop_map(|cells| {
            let mut seen = BTreeSet::new();
            cells
                .into_iter()
                .enumerate()
                .filter_map(|(i, (s, q, r))| {
                    let annotator = format!("a{}", i % 4);
                    seen.insert((s, annotator.clone()))
                        .then(|| j(&format!("s{s}"), &annotator, q, r as f64 / 4.0))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn permutation_invariant(pool in arb_pool(), seed in any::<u64>()) {
            let base = aggregate(&keep_all(&pool), &[]);
            let mut shuffled = pool.clone();
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let other = aggregate(&keep_all(&shuffled), &[]);
            prop_assert_eq!(base, other);
        }
    }
}
