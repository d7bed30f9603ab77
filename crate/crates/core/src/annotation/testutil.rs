use chrono::TimeZone;

use super::judgment::JudgmentRecord;

pub(crate) fn j(summary: &str, annotator: &str, q: [bool; 4], quality: f64) -> JudgmentRecord {
    JudgmentRecord {
        summary_id: summary.into(),
        annotator_id: annotator.into(),
        article_contradiction: q[0],
        self_contradiction: q[1],
        hallucination: q[2],
        convincingness: q[3],
        overall_quality: quality,
        timestamp: chrono::Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
    }
}
