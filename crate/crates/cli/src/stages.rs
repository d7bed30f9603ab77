//! Stage operations shared by the single-purpose commands and the pipeline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use anyhow::{bail, Context, Result};
use factlens_core::annotation::adjudicate::{adjudicate_ties, Adjudicator, AdjudicatorBackend};
use factlens_core::annotation::export::write_metric_split;
use factlens_core::annotation::judgment::{read_judgments, read_summaries};
use factlens_core::annotation::{
    aggregate, compute_agreement, export_metric_dataset, filter_annotators, find_ties,
    perfect_partial_agreement, AggregateReport, AgreementProfile, Dimension, FilterMode, JudgmentRecord,
    MetricExample, SummaryContext,
};
use factlens_core::dataset::expand::expanded_count;
use factlens_core::dataset::record::{read_dataset, write_dataset, EvidenceKind, ExpansionStrategy};
use factlens_core::dataset::{
    assemble_dataset, expand_snippets, split_dataset, subset, ClaimRecord, VerdictMapping,
};
use factlens_core::ingest::factcheck::{
    fetch_factcheck_entries, FactCheckSource, FixtureFactCheckSource, LiveFactCheckSource,
};
use factlens_core::ingest::retry::{RetryPolicy, ThreadSleeper};
use factlens_core::ingest::scrape::{
    FetchStatus, FixtureFetcher, HttpFetcher, PageFetcher, ScrapedArticle, Scraper,
};
use factlens_core::ingest::snippets::{
    fetch_snippets, FixtureSearchBackend, LiveSearchBackend, SearchBackend, SearchSnippetSet,
};
use factlens_core::ingest::store::RawStore;
use factlens_core::ingest::{BackendSpec, DateWindow, Publisher, RawFactCheckEntry};
use factlens_core::jsonl;
use factlens_core::rouge::{score_predictions, PerExampleLine, Prediction, RougeReport, RougeScore};
use factlens_core::significance::{significance_protocol, SignificanceReport};
use factlens_core::stats::{paired_t_test, Alternative, TTestResult};
use factlens_core::topics::{fit_topic_model, TopicTable};
use factlens_neural::explainer::{record_input, train, Explainer, GenerationConfig, TrainingLog};
use factlens_neural::metric_model::{
    evaluate, rerun, train_metric_model, EvalSuite, MetricModel, MetricModelConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::TopicsSection;

pub fn factcheck_source(spec: &str) -> Result<Box<dyn FactCheckSource>> {
    Ok(match spec.parse::<BackendSpec>()? {
        BackendSpec::Live => Box::new(LiveFactCheckSource::from_env()?),
        BackendSpec::Fixture(dir) => Box::new(FixtureFactCheckSource::new(dir)),
    })
}

pub fn page_fetcher(spec: &str) -> Result<Box<dyn PageFetcher>> {
    Ok(match spec.parse::<BackendSpec>()? {
        BackendSpec::Live => Box::new(HttpFetcher::new()?),
        BackendSpec::Fixture(path) => Box::new(FixtureFetcher::load(path)?),
    })
}

pub fn search_backend(spec: &str) -> Result<Box<dyn SearchBackend>> {
    Ok(match spec.parse::<BackendSpec>()? {
        BackendSpec::Live => Box::new(LiveSearchBackend::from_env()?),
        BackendSpec::Fixture(path) => Box::new(FixtureSearchBackend::load(path)?),
    })
}

pub fn adjudicator(spec: &str) -> Result<Box<dyn Adjudicator>> {
    Ok(spec.parse::<AdjudicatorBackend>()?.build()?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    jsonl::write_json(path, value).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    jsonl::read_json(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PublisherIngest {
    pub pages: usize,
    pub fetched: usize,
    pub skipped: usize,
    /// Entries held by the store after persisting.
    pub stored: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub publishers: BTreeMap<Publisher, PublisherIngest>,
    pub articles: BTreeMap<String, usize>,
}

/// Fetches and persists entries for each publisher into `out/raw`.
pub fn ingest_entries(
    source: &dyn FactCheckSource,
    publishers: &[Publisher],
    window: DateWindow,
    out: &Path,
) -> Result<IngestReport> {
    let store = RawStore::new(out.join("raw"));
    let mut report = IngestReport::default();
    for &p in publishers {
        let fetched = fetch_factcheck_entries(source, p, window, &RetryPolicy::default(), &ThreadSleeper)?;
        let persisted = store.persist(p, &fetched.entries, chrono::Utc::now())?;
        tracing::info!(
            publisher = %p,
            entries = fetched.entries.len(),
            added = persisted.added,
            already_present = persisted.already_present,
            "ingested"
        );
        report.publishers.insert(
            p,
            PublisherIngest {
                pages: fetched.pages,
                fetched: fetched.entries.len(),
                skipped: fetched.skipped,
                stored: store.load(p)?.len(),
            },
        );
    }
    Ok(report)
}

/// Scrapes every distinct URL in order, returning the articles and counts per
/// fetch status.
pub fn scrape_urls<'a>(
    fetcher: Box<dyn PageFetcher>,
    urls: impl IntoIterator<Item = &'a str>,
) -> Result<(Vec<ScrapedArticle>, BTreeMap<String, usize>)> {
    let scraper = Scraper::new(fetcher);
    let mut seen = BTreeSet::new();
    let mut articles = Vec::new();
    let mut counts = BTreeMap::new();
    for url in urls {
        if !seen.insert(url) {
            continue;
        }
        let article = match scraper.scrape_article(url) {
            Ok(a) => a,
            Err(e) => {
                tracing::warn!(url, error = %e, "skipping unscrapable url");
                continue;
            }
        };
        let status = match article.fetch_status {
            FetchStatus::Ok => "ok",
            FetchStatus::HttpError => "http_error",
            FetchStatus::ParseError => "parse_error",
        };
        *counts.entry(status.to_string()).or_insert(0) += 1;
        articles.push(article);
    }
    Ok((articles, counts))
}

pub fn raw_entries(raw: &Path, publishers: &[Publisher]) -> Result<Vec<RawFactCheckEntry>> {
    if !raw.is_dir() {
        bail!("raw store {} is not a directory", raw.display());
    }
    let store = RawStore::new(raw);
    let mut all = Vec::new();
    for &p in publishers {
        all.extend(store.load(p)?);
    }
    Ok(all)
}

/// Snippet sets for each distinct claim, given as `(claim, excluded domain)`
/// pairs. Later duplicates of a claim are skipped.
pub fn collect_snippets(
    backend: &dyn SearchBackend,
    claims: &[(String, String)],
) -> Result<Vec<SearchSnippetSet>> {
    let mut seen = BTreeSet::new();
    let mut sets = Vec::new();
    for (claim, domain) in claims {
        if !seen.insert(claim.as_str()) {
            continue;
        }
        let set = fetch_snippets(backend, claim, domain, &RetryPolicy::default(), &ThreadSleeper)?;
        set.validate()?;
        sets.push(set);
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub strategy: ExpansionStrategy,
    pub ls_threshold: Option<f64>,
    pub records: usize,
    pub expanded_snippets: usize,
}

/// Replaces the snippet evidence of each record with its expanded form.
pub fn expand_records(
    records: &mut [ClaimRecord],
    sets: &[SearchSnippetSet],
    pages: &[ScrapedArticle],
    strategy: ExpansionStrategy,
    threshold: Option<f64>,
) -> Result<ExpansionReport> {
    let by_claim: HashMap<&str, &SearchSnippetSet> =
        sets.iter().map(|s| (s.claim_text.as_str(), s)).collect();
    let pages: HashMap<String, ScrapedArticle> = pages.iter().map(|p| (p.url.clone(), p.clone())).collect();
    let mut report = ExpansionReport {
        strategy,
        ls_threshold: threshold,
        records: 0,
        expanded_snippets: 0,
    };
    for r in records.iter_mut() {
        if r.evidence.kind == EvidenceKind::Article {
            continue;
        }
        let Some(set) = by_claim.get(r.claim.as_str()) else {
            continue;
        };
        let bundle = expand_snippets(set, &pages, strategy, threshold)?;
        report.expanded_snippets += expanded_count(set, &bundle);
        report.records += 1;
        r.evidence = bundle;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub report: factlens_core::dataset::BuildReport,
    /// Nominal verdict counts for records that carry one.
    pub nominal_labels: BTreeMap<String, usize>,
    pub publisher_filter: Option<Publisher>,
    pub records_written: usize,
}

pub fn build_dataset(
    raw: &Path,
    articles: &Path,
    snippets: Option<&Path>,
    source: factlens_core::dataset::EvidenceSource,
    mapping: Option<&Path>,
    publisher: Option<Publisher>,
) -> Result<(Vec<ClaimRecord>, BuildSummary)> {
    if !raw.is_dir() {
        bail!("raw store {} is not a directory", raw.display());
    }
    if !articles.is_file() {
        bail!("articles file {} does not exist", articles.display());
    }
    let mapping = match mapping {
        Some(p) => VerdictMapping::load(p)?,
        None => VerdictMapping::shipped(),
    };
    let (mut records, report) = assemble_dataset(raw, articles, snippets, source, &mapping)?;
    if let Some(p) = publisher {
        records = subset(&records, p);
    }
    let mut nominal_labels = BTreeMap::new();
    for r in &records {
        if let Some(l) = r.nominal_label {
            *nominal_labels.entry(l.as_str().to_string()).or_insert(0) += 1;
        }
    }
    let summary = BuildSummary {
        report,
        nominal_labels,
        publisher_filter: publisher,
        records_written: records.len(),
    };
    Ok((records, summary))
}

pub fn split_to_dir(
    dataset: &Path,
    ratio: f64,
    seed: u64,
    out: &Path,
) -> Result<factlens_core::dataset::split::SplitSummary> {
    let records = read_dataset(dataset)?;
    let split = split_dataset(&records, ratio, seed)?;
    std::fs::create_dir_all(out)?;
    write_dataset(out.join("train.jsonl"), &split.train)?;
    write_dataset(out.join("test.jsonl"), &split.test)?;
    let summary = factlens_core::dataset::split::SplitSummary {
        seed,
        ratio,
        train: split.train.len(),
        test: split.test.len(),
    };
    write_json(&out.join("split.json"), &summary)?;
    Ok(summary)
}

pub fn topics(dataset: &Path, section: &TopicsSection, seed: u64) -> Result<TopicTable> {
    let claims: Vec<String> = read_dataset(dataset)?.into_iter().map(|r| r.claim).collect();
    let (table, _) = fit_topic_model(
        &claims,
        &section.vectorizer(),
        &section.lda(seed),
        section.top_terms,
    )?;
    Ok(table)
}

/// Trains on `train`; model, per-epoch checkpoints and the log go to `out`.
pub fn train_explainer(
    train_file: &Path,
    config: &GenerationConfig,
    out: &Path,
) -> Result<(Explainer, TrainingLog)> {
    let records = read_dataset(train_file)?;
    Ok(train(&records, config, Some(out))?)
}

pub fn predict(
    explainer: &Explainer,
    records: &[ClaimRecord],
    config: &GenerationConfig,
) -> Result<Vec<Prediction>> {
    records
        .iter()
        .map(|r| {
            let input = record_input(r, config.max_input_tokens)?;
            Ok(Prediction {
                id: r.id.clone(),
                claim: r.claim.clone(),
                prediction: explainer.generate(&input, config.beam_width, config.max_output_tokens)?,
                reference: r.explanation.clone(),
            })
        })
        .collect()
}

/// Annotation inputs: each record's claim, evidence and gold verdict with
/// the generated explanation.
pub fn summaries_from(predictions: &[Prediction], records: &[ClaimRecord]) -> Result<Vec<SummaryContext>> {
    let by_id: HashMap<&str, &ClaimRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    predictions
        .iter()
        .map(|p| {
            let r = by_id
                .get(p.id.as_str())
                .with_context(|| format!("prediction {} has no dataset record", p.id))?;
            Ok(SummaryContext {
                summary_id: p.id.clone(),
                claim: r.claim.clone(),
                verdict: r.verdict_text.clone(),
                article: r.evidence.text(),
                explanation: p.prediction.clone(),
            })
        })
        .collect()
}

/// Corpus ROUGE with the per-example scores written next to the report.
pub fn score_to_dir(predictions: &Path, out: &Path) -> Result<RougeReport> {
    let preds: Vec<Prediction> = jsonl::read(predictions)?;
    let score = score_predictions(&preds)?;
    std::fs::create_dir_all(out)?;
    let per_example = out.join("per_example.jsonl");
    let lines: Vec<PerExampleLine> = score
        .ids
        .iter()
        .zip(&score.per_example)
        .map(|(id, s)| PerExampleLine {
            id: id.clone(),
            scores: *s,
        })
        .collect();
    jsonl::write(&per_example, &lines)?;
    let report = RougeReport {
        rouge1: score.rouge1_f,
        rouge2: score.rouge2_f,
        rouge_l: score.rouge_l_f,
        n: score.n(),
        per_example_path: "per_example.jsonl".into(),
    };
    write_json(&out.join("rouge.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub result: Option<TTestResult>,
    pub degenerate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n: usize,
    pub alternative: Alternative,
    pub mean_a: BTreeMap<String, f64>,
    pub mean_b: BTreeMap<String, f64>,
    pub tests: BTreeMap<String, MetricComparison>,
}

/// Paired t-tests of per-example ROUGE between two prediction files, paired
/// by example id.
pub fn compare_predictions(a: &Path, b: &Path, alternative: Alternative) -> Result<CompareReport> {
    let score = |p: &Path| -> Result<RougeScore> { Ok(score_predictions(&jsonl::read::<Prediction>(p)?)?) };
    let (sa, sb) = (score(a)?, score(b)?);
    let index: HashMap<&str, usize> = sb
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    if sa.ids.len() != sb.ids.len() || sa.ids.iter().any(|id| !index.contains_key(id.as_str())) {
        bail!("prediction files do not cover the same example ids");
    }
    let order: Vec<usize> = sa.ids.iter().map(|id| index[id.as_str()]).collect();
    let mut tests = BTreeMap::new();
    let mut mean_a = BTreeMap::new();
    let mut mean_b = BTreeMap::new();
    let series: [(&str, Vec<f64>, Vec<f64>); 3] = [
        ("rouge1", sa.rouge1_series(), sb.rouge1_series()),
        ("rouge2", sa.rouge2_series(), sb.rouge2_series()),
        ("rougeL", sa.rouge_l_series(), sb.rouge_l_series()),
    ];
    for (name, xa, xb) in series {
        let xb: Vec<f64> = order.iter().map(|&i| xb[i]).collect();
        mean_a.insert(name.to_string(), xa.iter().sum::<f64>() / xa.len() as f64 * 100.0);
        mean_b.insert(name.to_string(), xb.iter().sum::<f64>() / xb.len() as f64 * 100.0);
        let cmp = match paired_t_test(&xa, &xb, alternative) {
            Ok(r) => MetricComparison {
                result: Some(r),
                degenerate: None,
            },
            Err(factlens_core::Error::Degenerate(m)) => MetricComparison {
                result: None,
                degenerate: Some(m),
            },
            Err(e) => return Err(e.into()),
        };
        tests.insert(name.to_string(), cmp);
    }
    Ok(CompareReport {
        n: sa.ids.len(),
        alternative,
        mean_a,
        mean_b,
        tests,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub profiles: Vec<AgreementProfile>,
    pub perfect_partial: factlens_core::annotation::agreement::PerfectPartialTable,
}

pub fn agreement_report(judgments: &[JudgmentRecord]) -> AgreementReport {
    AgreementReport {
        profiles: compute_agreement(judgments),
        perfect_partial: perfect_partial_agreement(judgments),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub judgments: usize,
    /// Judgments whose summary is not among the known summaries.
    pub ignored_judgments: usize,
    pub threshold: f64,
    pub mode: FilterMode,
    pub kept_annotators: BTreeMap<Dimension, BTreeSet<String>>,
    pub ties: usize,
    pub adjudicated: usize,
    pub unresolved_ties: BTreeMap<Dimension, usize>,
    pub labels: usize,
}

pub struct AggregateOptions<'a> {
    pub threshold: f64,
    pub mode: FilterMode,
    pub adjudicator: &'a dyn Adjudicator,
}

/// Agreement, filtering, tie adjudication and label aggregation. Writes
/// `agreement.json`, `filtered.json`, `adjudications.jsonl` and
/// `labels.json` into `out`.
pub fn aggregate_to_dir(
    judgments: &Path,
    summaries: &[SummaryContext],
    options: &AggregateOptions<'_>,
    out: &Path,
) -> Result<(AggregateReport, AggregateSummary)> {
    let all = read_judgments(judgments)?;
    let known: BTreeSet<&str> = summaries.iter().map(|s| s.summary_id.as_str()).collect();
    let (kept, ignored): (Vec<JudgmentRecord>, Vec<JudgmentRecord>) = all
        .into_iter()
        .partition(|j| known.contains(j.summary_id.as_str()));
    if !ignored.is_empty() {
        tracing::warn!(count = ignored.len(), "ignoring judgments of unknown summaries");
    }
    std::fs::create_dir_all(out)?;
    let agreement = agreement_report(&kept);
    write_json(&out.join("agreement.json"), &agreement)?;
    let pool = filter_annotators(&kept, &agreement.profiles, options.threshold, options.mode)?;
    write_json(&out.join("filtered.json"), &pool)?;
    let contexts: HashMap<String, SummaryContext> = summaries
        .iter()
        .map(|s| (s.summary_id.clone(), s.clone()))
        .collect();
    let ties = find_ties(&pool);
    let log = out.join("adjudications.jsonl");
    std::fs::write(&log, "")?;
    let records = adjudicate_ties(options.adjudicator, &ties, &contexts, Some(&log))?;
    let report = aggregate(&pool, &records);
    write_json(&out.join("labels.json"), &report)?;
    let summary = AggregateSummary {
        judgments: kept.len(),
        ignored_judgments: ignored.len(),
        threshold: options.threshold,
        mode: options.mode,
        kept_annotators: pool.kept_annotators.clone(),
        ties: ties.len(),
        adjudicated: records.iter().filter(|r| r.outcome.is_some()).count(),
        unresolved_ties: report.unresolved_ties.clone(),
        labels: report.labels.len(),
    };
    Ok((report, summary))
}

pub fn export_to_dir(
    report: &AggregateReport,
    summaries: &[SummaryContext],
    train: usize,
    eval: usize,
    seed: u64,
    out: &Path,
) -> Result<factlens_core::annotation::MetricSplit> {
    let contexts: HashMap<String, SummaryContext> = summaries
        .iter()
        .map(|s| (s.summary_id.clone(), s.clone()))
        .collect();
    let split = export_metric_dataset(&report.labels, &contexts, train, eval, seed)?;
    std::fs::create_dir_all(out)?;
    write_metric_split(&split, out)?;
    Ok(split)
}

pub fn read_metric_data(dir: &Path) -> Result<(Vec<MetricExample>, Vec<MetricExample>)> {
    Ok((
        jsonl::read(dir.join("train.jsonl"))?,
        jsonl::read(dir.join("eval.jsonl"))?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEvalReport {
    pub dimension: Dimension,
    /// Training seed, when the model was trained in the same run.
    pub seed: Option<u64>,
    pub train_examples: usize,
    pub eval_examples: usize,
    pub eval: EvalSuite,
}

/// Trains one predictor and evaluates it on the held-out part.
pub fn train_and_eval_metric(
    data: &Path,
    dim: Dimension,
    config: &MetricModelConfig,
    out: &Path,
) -> Result<MetricEvalReport> {
    let (train_set, eval_set) = read_metric_data(data)?;
    let (model, _) = train_metric_model(&train_set, dim, config, Some(out))?;
    let report = eval_metric(&model, &train_set, &eval_set, Some(config.seed))?;
    write_json(&out.join("eval.json"), &report)?;
    Ok(report)
}

pub fn eval_metric(
    model: &MetricModel,
    train_set: &[MetricExample],
    eval_set: &[MetricExample],
    seed: Option<u64>,
) -> Result<MetricEvalReport> {
    let dim = model.dimension();
    let count = |xs: &[MetricExample]| xs.iter().filter(|e| e.target(dim).is_some()).count();
    Ok(MetricEvalReport {
        dimension: dim,
        seed,
        train_examples: count(train_set),
        eval_examples: count(eval_set),
        eval: evaluate(model, train_set, eval_set)?,
    })
}

/// Rerun protocol over every checkpoint and seed for one dimension, on the
/// union of the exported train and eval examples.
pub fn significance_for(
    data: &Path,
    dim: Dimension,
    checkpoints: &[String],
    base: &MetricModelConfig,
    seeds: &[u64],
    eval_fraction: f64,
) -> Result<SignificanceReport> {
    let (mut examples, eval_set) = read_metric_data(data)?;
    examples.extend(eval_set);
    let names: Vec<&str> = checkpoints.iter().map(String::as_str).collect();
    let report = significance_protocol(dim.as_str(), &names, seeds, |checkpoint, seed| {
        let config = MetricModelConfig {
            checkpoint: checkpoint.to_string(),
            ..base.clone()
        };
        rerun(&examples, dim, &config, eval_fraction, seed)
            .map_err(|e| factlens_core::Error::InvalidInput(e.to_string()))
    })?;
    Ok(report)
}

pub fn read_summaries_file(path: &Path) -> Result<Vec<SummaryContext>> {
    Ok(read_summaries(path)?)
}
