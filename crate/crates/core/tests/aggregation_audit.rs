use std::collections::HashMap;
use std::path::PathBuf;

use factlens_core::annotation::judgment::{read_judgments, read_summaries};
use factlens_core::annotation::{
    adjudicate_ties, aggregate, compute_agreement, filter_annotators, find_ties, Dimension, FilterMode,
    FixtureAdjudicator,
};
use serde_json::Value;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/aggregation")
}

fn json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir().join(name)).unwrap()).unwrap()
}

#[test]
fn fifty_summary_fixture_matches_expected_file() {
    let judgments = read_judgments(dir().join("judgments.jsonl")).unwrap();
    let summaries: HashMap<_, _> = read_summaries(dir().join("summaries.jsonl"))
        .unwrap()
        .into_iter()
        .map(|s| (s.summary_id.clone(), s))
        .collect();
    let profiles = compute_agreement(&judgments);
    let expected_profiles = json("profiles.json");
    for p in &profiles {
        let want = expected_profiles["overall_agreement"][&p.annotator_id]
            .as_f64()
            .unwrap();
        assert!(
            (p.overall_agreement.unwrap() - want).abs() < 1e-12,
            "{}",
            p.annotator_id
        );
    }
    let pool = filter_annotators(&judgments, &profiles, 0.6, FilterMode::Overall).unwrap();
    assert!(pool
        .kept_annotators
        .values()
        .all(|k| !k.contains("ann-z") && k.len() == 5));

    let adjudicator = FixtureAdjudicator::load(dir().join("adjudicator.jsonl")).unwrap();
    let ties = find_ties(&pool);
    assert_eq!(ties.len(), 7);
    let log = tempfile::NamedTempFile::new().unwrap();
    let records = adjudicate_ties(&adjudicator, &ties, &summaries, Some(log.path())).unwrap();
    assert_eq!(records.iter().filter(|r| r.outcome.is_none()).count(), 2);
    let logged: Vec<Value> = factlens_core::jsonl::read(log.path()).unwrap();
    assert_eq!(logged.len(), ties.len());

    let report = aggregate(&pool, &records);
    assert_eq!(serde_json::to_value(&report).unwrap(), json("expected.json"));
    assert_eq!(report.unresolved_ties.get(&Dimension::Convincingness), Some(&3));
}
