use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::agreement::AgreementProfile;
use super::judgment::{Dimension, JudgmentRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// One decision per annotator from overall agreement.
    #[default]
    Overall,
    /// Binary dimensions filtered by per-question agreement; the quality
    /// rating follows overall agreement.
    PerQuestion,
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "overall" => Ok(FilterMode::Overall),
            "per_question" | "per-question" => Ok(FilterMode::PerQuestion),
            other => Err(Error::InvalidInput(format!("unknown filter mode {other:?}"))),
        }
    }
}

/// Judgments that survived filtering, kept separately per dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilteredPool {
    pub threshold: f64,
    pub mode: FilterMode,
    pub kept: BTreeMap<Dimension, Vec<JudgmentRecord>>,
    pub kept_annotators: BTreeMap<Dimension, BTreeSet<String>>,
    /// Summaries that lost every judgment for a dimension.
    pub dropped_summaries: BTreeMap<Dimension, usize>,
}

impl FilteredPool {
    pub fn judgments(&self, dim: Dimension) -> &[JudgmentRecord] {
        self.kept.get(&dim).map_or(&[], Vec::as_slice)
    }
}

/// Keeps judgments of annotators whose agreement is strictly above
/// `threshold`. Annotators without a defined agreement never pass.
pub fn filter_annotators(
    judgments: &[JudgmentRecord],
    profiles: &[AgreementProfile],
    threshold: f64,
    mode: FilterMode,
) -> Result<FilteredPool> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let by_id: HashMap<&str, &AgreementProfile> =
        profiles.iter().map(|p| (p.annotator_id.as_str(), p)).collect();
    let passes = |annotator: &str, dim: Dimension| -> bool {
        let Some(p) = by_id.get(annotator) else {
            return false;
        };
        let score = match (mode, dim.is_binary()) {
            (FilterMode::PerQuestion, true) => p.per_question_agreement.get(&dim).copied(),
            _ => p.overall_agreement,
        };
        score.is_some_and(|s| s > threshold)
    };
    let all_summaries: BTreeSet<&str> = judgments.iter().map(|j| j.summary_id.as_str()).collect();
    let mut pool = FilteredPool {
        threshold,
        mode,
        ..Default::default()
    };
    for dim in Dimension::ALL {
        let kept: Vec<JudgmentRecord> = judgments
            .iter()
            .filter(|j| passes(&j.annotator_id, dim))
            .cloned()
            .collect();
        let covered: BTreeSet<&str> = kept.iter().map(|j| j.summary_id.as_str()).collect();
        let lost = all_summaries.len() - covered.len();
        if lost > 0 {
            tracing::info!(dimension = %dim, summaries = lost, "summaries lost every judgment");
        }
        pool.dropped_summaries.insert(dim, lost);
        pool.kept_annotators
            .insert(dim, kept.iter().map(|j| j.annotator_id.clone()).collect());
        pool.kept.insert(dim, kept);
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::agreement::compute_agreement;
    use crate::annotation::testutil::j;

    fn profile(id: &str, overall: f64) -> AgreementProfile {
        AgreementProfile {
            annotator_id: id.into(),
            overall_agreement: Some(overall),
            per_question_agreement: Dimension::BINARY.into_iter().map(|d| (d, overall)).collect(),
            cells: 4,
        }
    }

    #[test]
    fn strict_threshold() {
        let pool = [
            j("s", "A", [true; 4], 0.5),
            j("s", "B", [true; 4], 0.5),
            j("s", "C", [true; 4], 0.5),
        ];
        let profiles = [profile("A", 0.8), profile("B", 0.6), profile("C", 0.76)];
        let out = filter_annotators(&pool, &profiles, 0.75, FilterMode::Overall).unwrap();
        let kept: Vec<&str> = out.kept_annotators[&Dimension::Hallucination]
            .iter()
            .map(String::as_str)
            .collect();
        assert_eq!(kept, ["A", "C"]);
        let exact = [profile("A", 0.75), profile("B", 0.6), profile("C", 0.76)];
        let out = filter_annotators(&pool, &exact, 0.75, FilterMode::Overall).unwrap();
        assert!(!out.kept_annotators[&Dimension::Quality].contains("A"));
    }

    #[test]
    fn zero_threshold_keeps_agreeing_pool() {
        let pool = [
            j("s", "A", [true, true, false, false], 0.5),
            j("s", "B", [true, false, false, true], 0.5),
            j("s", "C", [true, true, true, false], 0.5),
        ];
        let out = filter_annotators(&pool, &compute_agreement(&pool), 0.0, FilterMode::Overall).unwrap();
        for dim in Dimension::ALL {
            assert_eq!(out.judgments(dim), pool);
        }
    }

    #[test]
    fn per_question_mode_and_drops() {
        let pool = [j("s", "A", [true; 4], 0.5), j("t", "B", [true; 4], 0.5)];
        let mut a = profile("A", 0.9);
        a.per_question_agreement.insert(Dimension::Hallucination, 0.5);
        let profiles = [a, profile("B", 0.1)];
        let out = filter_annotators(&pool, &profiles, 0.69, FilterMode::PerQuestion).unwrap();
        assert_eq!(out.judgments(Dimension::ArticleContradiction).len(), 1);
        assert!(out.judgments(Dimension::Hallucination).is_empty());
        assert_eq!(out.dropped_summaries[&Dimension::Hallucination], 2);
        assert_eq!(out.dropped_summaries[&Dimension::Quality], 1);
    }

    #[test]
    fn rejects_out_of_range_threshold() {
        assert!(filter_annotators(&[], &[], 1.5, FilterMode::Overall).is_err());
    }
}
