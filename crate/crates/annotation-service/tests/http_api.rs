mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{service, Client};
use serde_json::{json, Value};

fn run_annotator(base: String, annotator: String) -> Vec<String> {
    let client = Client::new(&base);
    let mut judged = Vec::new();
    loop {
        let (status, body) = client.task(&annotator);
        assert_eq!(status, 200);
        assert_eq!(body["phase"], "main");
        let Some(task) = body["tasks"].as_array().unwrap().first().cloned() else {
            break;
        };
        let (status, _) = client.judge(&annotator, task["task_id"].as_str().unwrap(), 0.5);
        assert_eq!(status, 201);
        judged.push(task["summary_id"].as_str().unwrap().to_string());
    }
    judged
}

#[test]
fn three_annotators_over_twenty_summaries() {
    let base = service(20, false);
    let handles: Vec<_> = ["ann-1", "ann-2", "ann-3"]
        .into_iter()
        .map(|a| {
            let base = base.clone();
            std::thread::spawn(move || run_annotator(base, a.to_string()))
        })
        .collect();
    for h in handles {
        let judged = h.join().unwrap();
        let distinct: BTreeSet<&String> = judged.iter().collect();
        assert_eq!(distinct.len(), judged.len(), "an annotator repeated a summary");
        assert_eq!(judged.len(), 20);
    }
    let progress = Client::new(&base).progress(None);
    assert_eq!(progress["judgments"], 60);
    assert_eq!(progress["complete_summaries"], 20);
    let mut per_summary: BTreeMap<String, usize> = BTreeMap::new();
    for r in progress["records"].as_array().unwrap() {
        *per_summary
            .entry(r["summary_id"].as_str().unwrap().into())
            .or_default() += 1;
    }
    assert!(per_summary.values().all(|&c| c == 3));
}

#[test]
fn more_annotators_than_slots_never_exceed_the_cap() {
    let base = service(10, false);
    let handles: Vec<_> = (0..6)
        .map(|i| {
            let base = base.clone();
            std::thread::spawn(move || run_annotator(base, format!("ann-{i}")))
        })
        .collect();
    let total: usize = handles.into_iter().map(|h| h.join().unwrap().len()).sum();
    assert_eq!(total, 30);
    let progress = Client::new(&base).progress(None);
    let mut per_summary: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in progress["records"].as_array().unwrap() {
        let inserted = per_summary
            .entry(r["summary_id"].as_str().unwrap().into())
            .or_default()
            .insert(r["annotator_id"].as_str().unwrap().into());
        assert!(inserted);
    }
    assert!(per_summary.values().all(|s| s.len() == 3));
}

#[test]
fn judgment_status_codes() {
    let base = service(2, false);
    let client = Client::new(&base);
    let (_, body) = client.task("a");
    let task = body["tasks"][0]["task_id"].as_str().unwrap().to_string();

    let (status, first) = client.judge("a", &task, 0.75);
    assert_eq!(status, 201);
    assert_eq!(first["record"]["quality"], 0.75);
    assert_eq!(first["record"]["q1"], true);

    let (status, dup) = client.judge("a", &task, 0.1);
    assert_eq!(status, 409);
    assert_eq!(dup["record_id"], first["record_id"]);

    let (status, _) = client.judge("a", "missing::a", 0.5);
    assert_eq!(status, 404);

    let (status, _) = client.post(
        "/api/judgment",
        &json!({"annotator_id": "a", "task_id": task, "q1": true, "q2": true, "q3": true, "quality": 0.5}),
    );
    assert_eq!(status, 422);

    let (_, body) = client.task("b");
    let other = body["tasks"][0]["task_id"].as_str().unwrap().to_string();
    let (status, _) = client.judge("b", &other, 1.3);
    assert_eq!(status, 422);

    let records = client.progress(Some("a"))["records"].clone();
    assert_eq!(records.as_array().unwrap().len(), 1);
    assert_eq!(records[0]["quality"], 0.75);
}

fn answers(correct: usize) -> Value {
    let gold = common::gold();
    let list: Vec<Value> = gold
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let flip = i >= correct;
            json!({"task_id": g.task_id, "q1": g.q1 != flip, "q2": g.q2, "q3": g.q3, "q4": g.q4})
        })
        .collect();
    Value::Array(list)
}

#[test]
fn qualification_flow() {
    let base = service(3, true);
    let client = Client::new(&base);

    let (status, body) = client.task("q");
    assert_eq!(status, 200);
    assert_eq!(body["phase"], "qualification");
    assert_eq!(body["tasks"].as_array().unwrap().len(), 4);

    let (status, out) = client.post(
        "/api/qualify",
        &json!({"annotator_id": "q", "answers": answers(3)}),
    );
    assert_eq!(status, 200);
    assert_eq!(out["qualified"], true);
    assert_eq!(out["correct"], 3);
    let (_, body) = client.task("q");
    assert_eq!(body["phase"], "main");

    let (_, out) = client.post(
        "/api/qualify",
        &json!({"annotator_id": "p", "answers": answers(4)}),
    );
    assert_eq!(out["qualified"], true);

    let (_, out) = client.post(
        "/api/qualify",
        &json!({"annotator_id": "w", "answers": answers(0)}),
    );
    assert_eq!(out["qualified"], false);
    assert_eq!(out["locked"], false);
    let (_, out) = client.post(
        "/api/qualify",
        &json!({"annotator_id": "w", "answers": answers(2)}),
    );
    assert_eq!(out["locked"], true);
    let (status, body) = client.post(
        "/api/qualify",
        &json!({"annotator_id": "w", "answers": answers(4)}),
    );
    assert_eq!(status, 403);
    assert_eq!(body["locked"], true);
    assert_eq!(client.task("w").0, 403);
}

#[test]
fn unqualified_annotator_cannot_submit_main_tasks() {
    let base = service(3, true);
    let client = Client::new(&base);
    let (_, body) = client.task("u");
    assert_eq!(body["phase"], "qualification");
    let (status, _) = client.judge("u", "s00::u", 0.5);
    assert_eq!(status, 404);
    let (status, _) = client.task("");
    assert_eq!(status, 422);
}
