use factlens_annotation::store::Answers;
use factlens_annotation::{ServiceConfig, Store, SystemClock};

#[path = "common/mod.rs"]
mod common;

#[test]
fn first_assignment_is_uniform_over_eligible_summaries() {
    let config = ServiceConfig {
        judgments_per_summary: 10_000,
        seed: 99,
        ..Default::default()
    };
    let store = Store::in_memory(config, Box::new(SystemClock)).unwrap();
    store.load_summaries(&common::summaries(10)).unwrap();
    let draws = 2000;
    let mut counts = [0usize; 10];
    for i in 0..draws {
        let (_, tasks) = store.next_task(&format!("a{i}")).unwrap();
        let idx: usize = tasks[0].summary_id[1..].parse().unwrap();
        counts[idx] += 1;
    }
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // chi-square critical value for 9 degrees of freedom at p = 0.001
    assert!(chi2 < 27.877, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn completed_pool_yields_three_per_summary() {
    let store = Store::in_memory(ServiceConfig::default(), Box::new(SystemClock)).unwrap();
    store.load_summaries(&common::summaries(7)).unwrap();
    let yes = Answers {
        q1: true,
        q2: true,
        q3: true,
        q4: true,
    };
    for a in ["x", "y", "z", "w"] {
        while let Some(t) = store.next_task(a).unwrap().1.pop() {
            store.submit(a, &t.task_id, yes, 1.0).unwrap();
        }
    }
    let progress = store.progress(None).unwrap();
    assert_eq!(progress.judgments, 21);
    assert_eq!(progress.complete_summaries, 7);
}
