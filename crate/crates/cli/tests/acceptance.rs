//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::DateTime;
use factlens_annotation::{router, GoldItem, ServiceConfig, Store, SystemClock};
use factlens_core::annotation::judgment::{read_judgments, read_summaries};
use factlens_core::annotation::{
    adjudicate_ties, aggregate, compute_agreement, export_metric_dataset, filter_annotators, find_ties,
    AggregatedLabel, Dimension, FilterMode, FixtureAdjudicator, JudgmentRecord, SummaryContext,
};
use factlens_core::dataset::{read_dataset, split_dataset, ClaimRecord, EvidenceBundle};
use factlens_core::ingest::Publisher;
use factlens_core::metrics::{mcc, mean_label, regression_eval};
use factlens_core::rouge::{rouge_l, rouge_n, score_predictions, Prediction};
use factlens_core::significance::{significance_protocol, TestKind};
use factlens_core::topics::{count_vectorize, fit_lda, LdaConfig, VectorizerConfig};
use factlens_neural::explainer::{record_input, train, GenerationConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn main() {
    let criteria = [
        Criterion {
            name: "rouge-oracle",
            budget: Some(Duration::from_secs(10)),
            run: rouge_oracle,
        },
        Criterion {
            name: "mcc-oracle",
            budget: Some(Duration::from_secs(5)),
            run: mcc_oracle,
        },
        Criterion {
            name: "hand-values",
            budget: None,
            run: hand_values,
        },
        Criterion {
            name: "agreement-recovery",
            budget: Some(Duration::from_secs(5)),
            run: agreement_recovery,
        },
        Criterion {
            name: "aggregation-audit",
            budget: None,
            run: aggregation_audit,
        },
        Criterion {
            name: "split-determinism",
            budget: None,
            run: split_determinism,
        },
        Criterion {
            name: "baseline-identity",
            budget: None,
            run: baseline_identity,
        },
        Criterion {
            name: "significance-protocol",
            budget: None,
            run: significance,
        },
        Criterion {
            name: "topic-model",
            budget: None,
            run: topic_model,
        },
        Criterion {
            name: "service-protocol",
            budget: None,
            run: service_protocol,
        },
        Criterion {
            name: "toy-generator",
            budget: Some(Duration::from_secs(60 * 60)),
            run: toy_generator,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {} ({elapsed:.2?}) {detail}", c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} ({elapsed:.2?}) {detail}", c.name);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn f1(overlap: usize, candidate: usize, reference: usize) -> f64 {
    if overlap == 0 || candidate == 0 || reference == 0 {
        return 0.0;
    }
    let p = overlap as f64 / candidate as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *counts.entry(tokens[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

fn rouge_n_oracle(c: &[&str], r: &[&str], n: usize) -> f64 {
    let cc = ngram_counts(c, n);
    let rc = ngram_counts(r, n);
    let overlap = cc
        .iter()
        .map(|(g, k)| (*k).min(rc.get(g).copied().unwrap_or(0)))
        .sum();
    f1(overlap, cc.values().sum(), rc.values().sum())
}

fn is_subsequence(sub: &[&str], of: &[&str]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|o| o == s))
}

/// Longest common subsequence by trying every subset of the candidate.
fn rouge_l_oracle(c: &[&str], r: &[&str]) -> f64 {
    let mut best = 0;
    for mask in 0u32..(1 << c.len()) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<&str> = (0..c.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| c[i])
            .collect();
        if is_subsequence(&sub, r) {
            best = k;
        }
    }
    f1(best, c.len(), r.len())
}

fn rouge_oracle() -> Outcome {
    const VOCAB: [&str; 7] = ["the", "cat", "sat", "on", "mat", "dog", "ran"];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for pair in 0..200 {
        let mut draw = || -> Vec<&str> {
            let len = rng.gen_range(1..=15);
            (0..len).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())]).collect()
        };
        let (c, r) = (draw(), draw());
        let (cs, rs) = (c.join(" "), r.join(" "));
        for (label, got, want) in [
            ("rouge_1", rouge_n(&cs, &rs, 1), rouge_n_oracle(&c, &r, 1)),
            ("rouge_2", rouge_n(&cs, &rs, 2), rouge_n_oracle(&c, &r, 2)),
            ("rouge_l", rouge_l(&cs, &rs), rouge_l_oracle(&c, &r)),
        ] {
            let diff = (got - want).abs();
            check!(
                diff <= 1e-9,
                "pair {pair} {label}: {got} vs oracle {want} ({cs:?} / {rs:?})"
            );
            worst = worst.max(diff);
        }
    }
    Ok(format!("200 pairs, max deviation {worst:.1e}"))
}

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

fn mcc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut zero_factor = 0;
    for case in 0..500 {
        let mut m: [u64; 4] = std::array::from_fn(|_| rng.gen_range(0..=25));
        // [tp, tn, fp, fn]; empty one marginal in a quarter of the cases
        if rng.gen_bool(0.25) {
            let (a, b) = [(0, 2), (0, 3), (1, 2), (1, 3)][rng.gen_range(0..4)];
            m[a] = 0;
            m[b] = 0;
        }
        let [tp, tn, fp, fn_] = m;
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (count, t, p) in [(tp, 1.0, 1.0), (tn, 0.0, 0.0), (fp, 0.0, 1.0), (fn_, 1.0, 0.0)] {
            for _ in 0..count {
                truth.push(t);
                pred.push(p);
            }
        }
        let want = pearson_oracle(&truth, &pred);
        let got = mcc(tp, tn, fp, fn_);
        if (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_) == 0 {
            zero_factor += 1;
            check!(got == 0.0, "case {case} {m:?}: zero-factor matrix gave {got}");
        }
        let diff = (got - want).abs();
        check!(diff <= 1e-9, "case {case} {m:?}: mcc {got} vs pearson {want}");
        worst = worst.max(diff);
    }
    check!(zero_factor > 0, "no zero-factor matrices were drawn");
    Ok(format!(
        "500 matrices ({zero_factor} zero-factor), max deviation {worst:.1e}"
    ))
}

fn hand_values() -> Outcome {
    let r1 = rouge_n("the cat", "the cat sat", 1);
    check!((r1 - 0.8).abs() <= 1e-9, "rouge_1 = {r1}");
    let rl = rouge_l("a c", "a b c d");
    check!((rl - 2.0 / 3.0).abs() <= 1e-9, "rouge_l = {rl}");
    let m = mcc(1, 2, 1, 0);
    check!((m - 2.0 / 12f64.sqrt()).abs() <= 1e-9, "mcc = {m}");
    Ok(format!("rouge_1 {r1}, rouge_l {rl:.6}, mcc {m:.6}"))
}

const BINARY: [Dimension; 4] = [
    Dimension::ArticleContradiction,
    Dimension::SelfContradiction,
    Dimension::Hallucination,
    Dimension::Convincingness,
];

/// Answer patterns for one block of three annotators. Each annotator's
/// mean peer agreement over the multiset is exactly `level`.
fn block_patterns(level: f64, cells: usize, rng: &mut ChaCha8Rng) -> Vec<[bool; 3]> {
    let mut out = Vec::with_capacity(cells);
    for i in 0..cells {
        let v = rng.gen_bool(0.5);
        let pattern = if level == 1.0 {
            [v; 3]
        } else if level == 0.75 {
            // 5 unanimous cells per 3 with a single dissenter in turn
            match i % 8 {
                0..=4 => [v; 3],
                k => {
                    let mut p = [v; 3];
                    p[k - 5] = !v;
                    p
                }
            }
        } else {
            let k = i % 8;
            [k & 1 != 0, k & 2 != 0, k & 4 != 0]
        };
        out.push(pattern);
    }
    out.shuffle(rng);
    out
}

fn agreement_recovery() -> Outcome {
    const LEVELS: [f64; 3] = [1.0, 0.75, 0.5];
    const PER_BLOCK: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut judgments = Vec::new();
    let mut planted = BTreeMap::new();
    for (g, &level) in LEVELS.iter().enumerate() {
        let patterns = block_patterns(level, PER_BLOCK * BINARY.len(), &mut rng);
        for s in 0..PER_BLOCK {
            let summary = format!("sum-{:03}", g * PER_BLOCK + s);
            for a in 0..3 {
                let annotator = format!("ann-{g}{a}");
                planted.insert(annotator.clone(), level);
                let answer = |d: usize| patterns[s * BINARY.len() + d][a];
                judgments.push(JudgmentRecord {
                    summary_id: summary.clone(),
                    annotator_id: annotator,
                    article_contradiction: answer(0),
                    self_contradiction: answer(1),
                    hallucination: answer(2),
                    convincingness: answer(3),
                    overall_quality: rng.gen_range(0..=4) as f64 / 4.0,
                    timestamp: DateTime::from_timestamp(1_700_000_000 + judgments.len() as i64, 0).unwrap(),
                });
            }
        }
    }
    judgments.shuffle(&mut rng);
    check!(planted.len() == 9, "pool has {} annotators", planted.len());

    let profiles = compute_agreement(&judgments);
    check!(profiles.len() == 9, "{} profiles", profiles.len());
    let mut recovered = Vec::new();
    for p in &profiles {
        let got = p
            .overall_agreement
            .ok_or(format!("{} has no agreement", p.annotator_id))?;
        let want = planted[&p.annotator_id];
        check!(
            (got - want).abs() <= 0.05,
            "{}: recovered {got}, planted {want}",
            p.annotator_id
        );
        recovered.push(format!("{}={got:.3}", p.annotator_id));
    }
    let pool =
        filter_annotators(&judgments, &profiles, 0.75, FilterMode::Overall).map_err(|e| e.to_string())?;
    let perfect: BTreeSet<String> = planted
        .iter()
        .filter(|(_, l)| **l == 1.0)
        .map(|(a, _)| a.clone())
        .collect();
    check!(!pool.kept_annotators.is_empty(), "filter produced no dimensions");
    for (dim, kept) in &pool.kept_annotators {
        check!(*kept == perfect, "{dim:?}: kept {kept:?}");
    }
    Ok(recovered.join(" "))
}

fn aggregation_audit() -> Outcome {
    let dir = fixtures().join("aggregation");
    let err = |e: factlens_core::Error| e.to_string();
    let judgments = read_judgments(dir.join("judgments.jsonl")).map_err(err)?;
    let summaries: HashMap<_, _> = read_summaries(dir.join("summaries.jsonl"))
        .map_err(err)?
        .into_iter()
        .map(|s| (s.summary_id.clone(), s))
        .collect();
    check!(summaries.len() == 50, "fixture has {} summaries", summaries.len());
    let profiles = compute_agreement(&judgments);
    let pool = filter_annotators(&judgments, &profiles, 0.6, FilterMode::Overall).map_err(err)?;
    let adjudicator = FixtureAdjudicator::load(dir.join("adjudicator.jsonl")).map_err(err)?;
    let ties = find_ties(&pool);
    let records = adjudicate_ties(&adjudicator, &ties, &summaries, None).map_err(err)?;
    let report = aggregate(&pool, &records);
    let expected: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let got = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    check!(got == expected, "aggregate output differs from expected.json");
    let broken: usize = report
        .labels
        .iter()
        .map(|l| l.tie_broken_by_adjudicator.len())
        .sum();
    Ok(format!(
        "{} ties, {broken} broken by the adjudicator, output identical",
        ties.len()
    ))
}

fn claim(i: usize) -> ClaimRecord {
    ClaimRecord {
        id: format!("claim-{i:05}"),
        claim: format!("claim {i}"),
        evidence: EvidenceBundle::article(format!("article {i}")),
        verdict_text: "False.".into(),
        explanation: format!("explanation {i}"),
        publisher: Publisher::ALL[i % 3],
        nominal_label: None,
    }
}

fn split_determinism() -> Outcome {
    let records: Vec<ClaimRecord> = (0..14121).map(claim).collect();
    let ids = |r: &[ClaimRecord]| r.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
    let mut runs = Vec::new();
    for _ in 0..3 {
        let s = split_dataset(&records, 0.8, 13).map_err(|e| e.to_string())?;
        runs.push((ids(&s.train), ids(&s.test)));
    }
    check!(
        runs.iter().all(|r| *r == runs[0]),
        "split members differ across runs"
    );
    let (train, test) = &runs[0];
    check!(
        train.len() == 11_296 && test.len() == 2_825,
        "sizes {}/{}",
        train.len(),
        test.len()
    );
    let all: BTreeSet<&String> = train.iter().chain(test).collect();
    check!(all.len() == records.len(), "split is not a partition");

    let labels: Vec<AggregatedLabel> = (0..2700)
        .map(|i| AggregatedLabel {
            summary_id: format!("s{i:04}"),
            binary_labels: BTreeMap::from([(Dimension::Hallucination, i % 3 == 0)]),
            quality_score: Some((i % 5) as f64 / 4.0),
            tie_broken_by_adjudicator: BTreeSet::new(),
        })
        .collect();
    let summaries: HashMap<String, SummaryContext> = labels
        .iter()
        .map(|l| {
            let ctx = SummaryContext {
                summary_id: l.summary_id.clone(),
                claim: "c".into(),
                verdict: "False.".into(),
                article: "a".into(),
                explanation: "e".into(),
            };
            (l.summary_id.clone(), ctx)
        })
        .collect();
    let mut reversed = labels.clone();
    reversed.reverse();
    let mut exports = Vec::new();
    for input in [&labels, &labels, &reversed] {
        let m = export_metric_dataset(input, &summaries, 2100, 521, 13).map_err(|e| e.to_string())?;
        let ids = |x: &[factlens_core::annotation::MetricExample]| {
            x.iter().map(|e| e.id.clone()).collect::<Vec<_>>()
        };
        exports.push((ids(&m.train), ids(&m.eval)));
    }
    check!(
        exports.iter().all(|e| *e == exports[0]),
        "metric export members differ across runs"
    );
    check!(
        exports[0].0.len() == 2100 && exports[0].1.len() == 521,
        "metric export sizes"
    );
    Ok(format!(
        "{}/{} claims, metric export 2100/521, 3 identical runs each",
        train.len(),
        test.len()
    ))
}

fn baseline_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for set in 0..200 {
        let n = rng.gen_range(2..=300);
        let labels: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mean = labels.iter().sum::<f64>() / n as f64;
        let mad = labels.iter().map(|l| (l - mean).abs()).sum::<f64>() / n as f64;
        let baseline = mean_label(&labels);
        let report = regression_eval(&vec![baseline; n], &labels).map_err(|e| e.to_string())?;
        let diff = (report.mae - mad).abs();
        check!(
            diff <= 1e-12,
            "set {set}: baseline MAE {} vs MAD {mad}",
            report.mae
        );
        check!(
            report.spearman == 0.0 && report.spearman_degenerate,
            "set {set}: constant predictor spearman {} degenerate {}",
            report.spearman,
            report.spearman_degenerate
        );
        worst = worst.max(diff);
    }
    Ok(format!(
        "200 label sets, max deviation {worst:.1e}, spearman 0 flagged"
    ))
}

fn significance() -> Outcome {
    // scipy.stats.ttest_1samp([0.7, 0.72, 0.68, 0.71, 0.69], 0)
    const T: f64 = 98.99494936611677;
    const P: f64 = 6.243149263708201e-08;
    let mccs = [0.7, 0.72, 0.68, 0.71, 0.69];
    let report = significance_protocol("hallucination", &["encoder-base"], &[1, 2, 3, 4, 5], |_, seed| {
        Ok(mccs[seed as usize - 1])
    })
    .map_err(|e| e.to_string())?;
    let c = &report.comparisons[0];
    check!(
        c.kind == TestKind::OneSampleVs0,
        "first comparison is {:?}",
        c.kind
    );
    let r = c.result.ok_or("comparison was degenerate")?;
    check!(r.p_value < 1e-4, "p = {}", r.p_value);
    check!((r.t_statistic - T).abs() <= 1e-6, "t = {} vs {T}", r.t_statistic);
    check!((r.p_value - P).abs() <= 1e-6, "p = {} vs {P}", r.p_value);
    Ok(format!("t {:.6}, p {:.3e}", r.t_statistic, r.p_value))
}

fn topic_model() -> Outcome {
    let space = ["orbit", "rocket", "launch", "planet", "comet", "galaxy"];
    let baking = ["flour", "butter", "sugar", "oven", "dough", "yeast"];
    let doc = |words: &[&str]| {
        words
            .iter()
            .enumerate()
            .flat_map(|(i, w)| std::iter::repeat_n(*w, 10 - i))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let docs = vec![doc(&space), doc(&baking)];
    let vectorizer = VectorizerConfig {
        max_features: 100,
        max_df: 1.0,
        min_df: 1,
        stop_words: vec![],
    };
    let counts = count_vectorize(&docs, &vectorizer).map_err(|e| e.to_string())?;
    let config = LdaConfig {
        n_topics: 2,
        max_iter: 50,
        ..LdaConfig::default()
    };
    let model = fit_lda(&counts, &config).map_err(|e| e.to_string())?;
    for (k, row) in model.distributions().iter().enumerate() {
        let s: f64 = row.iter().sum();
        check!((s - 1.0).abs() <= 1e-9, "topic {k} sums to {s}");
    }
    let tops: Vec<BTreeSet<String>> = model
        .top_terms(5)
        .into_iter()
        .map(|t| t.into_iter().map(|(w, _)| w).collect())
        .collect();
    check!(
        tops.len() == 2 && tops.iter().all(|t| t.len() == 5),
        "top terms {tops:?}"
    );
    check!(tops[0].is_disjoint(&tops[1]), "top terms overlap: {tops:?}");
    let pure = |t: &BTreeSet<String>, vocab: &[&str]| t.iter().all(|w| vocab.contains(&w.as_str()));
    let separated = (pure(&tops[0], &space) && pure(&tops[1], &baking))
        || (pure(&tops[0], &baking) && pure(&tops[1], &space));
    check!(separated, "topics mix vocabularies: {tops:?}");
    Ok(format!("{:?} | {:?}", tops[0], tops[1]))
}

fn gold() -> Vec<GoldItem> {
    (0..4)
        .map(|i| GoldItem {
            task_id: format!("gold-{i}"),
            claim: format!("gold claim {i}"),
            article: "gold article".into(),
            explanation: "gold explanation".into(),
            q1: i % 2 == 0,
            q2: false,
            q3: i == 3,
            q4: true,
        })
        .collect()
}

fn spawn_service() -> String {
    let store = Store::in_memory(ServiceConfig::default(), Box::new(SystemClock)).unwrap();
    let summaries: Vec<SummaryContext> = (0..20)
        .map(|i| SummaryContext {
            summary_id: format!("s{i:02}"),
            claim: format!("claim {i}"),
            verdict: "False.".into(),
            article: format!("article {i} ").repeat(120),
            explanation: format!("explanation {i}"),
        })
        .collect();
    store.load_summaries(&summaries).unwrap();
    store.load_gold(&gold()).unwrap();
    let store = Arc::new(store);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(store)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// Headless annotator: qualifies, then judges until no task is offered.
fn annotate(base: &str, annotator: &str) -> Result<usize, String> {
    let http = reqwest::blocking::Client::new();
    let get_task = || -> Result<Value, String> {
        let r = http
            .get(format!("{base}/api/task"))
            .query(&[("annotator", annotator)])
            .send()
            .map_err(|e| e.to_string())?;
        check!(r.status() == 200, "GET /api/task returned {}", r.status());
        r.json().map_err(|e| e.to_string())
    };
    let post = |path: &str, body: Value| -> Result<(u16, Value), String> {
        let r = http
            .post(format!("{base}{path}"))
            .json(&body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = r.status().as_u16();
        Ok((status, r.json().map_err(|e| e.to_string())?))
    };

    let first = get_task()?;
    check!(
        first["phase"] == "qualification",
        "{annotator} starts in {}",
        first["phase"]
    );
    let answers: Vec<Value> = gold()
        .iter()
        .map(|g| json!({"task_id": g.task_id, "q1": g.q1, "q2": g.q2, "q3": g.q3, "q4": g.q4}))
        .collect();
    let (status, out) = post(
        "/api/qualify",
        json!({"annotator_id": annotator, "answers": answers}),
    )?;
    check!(
        status == 200 && out["qualified"] == true,
        "{annotator} failed qualification: {out}"
    );

    let mut judged = 0;
    loop {
        let body = get_task()?;
        check!(body["phase"] == "main", "{annotator} in phase {}", body["phase"]);
        let Some(task) = body["tasks"].as_array().and_then(|t| t.first()).cloned() else {
            return Ok(judged);
        };
        let (status, out) = post(
            "/api/judgment",
            json!({
                "annotator_id": annotator,
                "task_id": task["task_id"],
                "q1": judged % 2 == 0, "q2": false, "q3": judged % 3 == 0, "q4": true,
                "quality": 0.5,
            }),
        )?;
        check!(
            status == 201,
            "{annotator} judgment rejected with {status}: {out}"
        );
        judged += 1;
    }
}

fn service_protocol() -> Outcome {
    let base = spawn_service();
    let handles: Vec<_> = ["ann-1", "ann-2", "ann-3"]
        .into_iter()
        .map(|a| {
            let base = base.clone();
            std::thread::spawn(move || annotate(&base, a))
        })
        .collect();
    for h in handles {
        h.join().map_err(|p| panic_message(&p))??;
    }
    let progress: Value = reqwest::blocking::get(format!("{base}/api/progress"))
        .and_then(|r| r.json())
        .map_err(|e| e.to_string())?;
    let records = progress["records"].as_array().ok_or("progress has no records")?;
    check!(records.len() == 60, "{} judgments", records.len());
    let mut per_summary: BTreeMap<&str, usize> = BTreeMap::new();
    let mut pairs = BTreeSet::new();
    for r in records {
        let summary = r["summary_id"].as_str().unwrap_or_default();
        *per_summary.entry(summary).or_default() += 1;
        check!(
            pairs.insert((summary, r["annotator_id"].as_str().unwrap_or_default())),
            "repeat on {summary}"
        );
    }
    let most = per_summary.values().copied().max().unwrap_or(0);
    check!(most <= 3, "a summary received {most} judgments");
    Ok(format!(
        "60 judgments over {} summaries, max {most} per summary, no repeats",
        per_summary.len()
    ))
}

fn toy_generator() -> Outcome {
    let records = read_dataset(fixtures().join("toy_explanations.jsonl")).map_err(|e| e.to_string())?;
    check!(records.len() == 32, "{} toy records", records.len());
    let config = GenerationConfig {
        epochs: 20,
        ..GenerationConfig::default()
    };
    let (explainer, log) = train(&records, &config, None).map_err(|e| e.to_string())?;
    let mut predictions = Vec::with_capacity(records.len());
    for r in &records {
        let input = record_input(r, config.max_input_tokens).map_err(|e| e.to_string())?;
        let text = explainer
            .generate(&input, config.beam_width, config.max_output_tokens)
            .map_err(|e| e.to_string())?;
        predictions.push(Prediction {
            id: r.id.clone(),
            claim: r.claim.clone(),
            prediction: text,
            reference: r.explanation.clone(),
        });
    }
    let score = score_predictions(&predictions).map_err(|e| e.to_string())?;
    let detail = format!(
        "{}: loss {:.3} -> {:.3}, train ROUGE-1 {:.2}",
        config.checkpoint, log.initial_loss, log.final_loss, score.rouge1_f
    );
    check!(log.final_loss < log.initial_loss, "{detail}");
    check!(score.rouge1_f > 90.0, "{detail}");
    Ok(detail)
}
