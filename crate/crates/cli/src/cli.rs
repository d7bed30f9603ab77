//! Argument parsing and command dispatch.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use factlens_annotation::{GoldItem, ServiceConfig, Store, SystemClock};
use factlens_core::annotation::judgment::read_judgments;
use factlens_core::annotation::{filter_annotators, Dimension, FilterMode, SummaryContext};
use factlens_core::dataset::{
    read_dataset, write_dataset, EvidenceBundle, EvidenceSource, ExpansionStrategy,
};
use factlens_core::ingest::scrape::ScrapedArticle;
use factlens_core::ingest::snippets::SearchSnippetSet;
use factlens_core::ingest::{DateWindow, Publisher};
use factlens_core::jsonl;
use factlens_core::rouge::Prediction;
use factlens_core::stats::Alternative;
use factlens_neural::explainer::{build_input, Explainer, GenerationConfig};
use factlens_neural::metric_model::{MetricModel, MetricModelConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{PipelineConfig, TopicsSection};
use crate::pipeline::{Pipeline, Stage};
use crate::stages::{self, read_json, write_json, AggregateOptions};
use crate::ConfigError;

#[derive(Debug, Parser)]
#[command(
    name = "factlens",
    version,
    about = "Fact-check explanation generation and evaluation"
)]
pub struct Cli {
    /// Log filter, e.g. `info` or `factlens_neural=debug`.
    #[arg(long, global = true, env = "FACTLENS_LOG", default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run pipeline stages from a configuration file.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Fetch fact-check reviews and scrape their articles.
    Ingest(IngestArgs),
    /// Retrieve search snippets for every stored claim.
    Snippets(SnippetsArgs),
    /// Assemble the dataset from the raw store and scraped evidence.
    BuildDataset(BuildArgs),
    /// Expand snippet evidence with paragraphs of the snippet source pages.
    Expand(ExpandArgs),
    /// Seeded train/test split.
    Split(SplitArgs),
    /// Fit a topic model over dataset claims.
    Topics(TopicsArgs),
    /// Fine-tune the explanation generator.
    TrainExplainer(TrainExplainerArgs),
    /// Generate one explanation.
    Explain(ExplainArgs),
    /// Generate explanations for a dataset file.
    Predict(PredictArgs),
    /// Turn predictions into annotation summaries.
    Summaries(SummariesArgs),
    /// Corpus ROUGE of a predictions file.
    Score(ScoreArgs),
    /// Paired t-tests between two prediction files.
    Compare(CompareArgs),
    /// Annotator agreement profiles.
    Agreement(AgreementArgs),
    /// Keep judgments of annotators above an agreement threshold.
    Filter(FilterArgs),
    /// Filter, adjudicate ties and aggregate labels.
    Aggregate(AggregateArgs),
    /// Seeded train/eval export of aggregated labels.
    ExportMetricData(ExportArgs),
    /// Serve the annotation HTTP interface.
    ServeAnnotation(ServeArgs),
    /// Dump stored judgments as JSONL.
    ExportJudgments(ExportJudgmentsArgs),
    /// Train one quality predictor.
    TrainMetric(TrainMetricArgs),
    /// Evaluate a trained quality predictor.
    EvalMetric(EvalMetricArgs),
    /// Rerun protocol and t-tests over checkpoints and seeds.
    Significance(SignificanceArgs),
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated stages; defaults to the configured list or all stages.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub stages: Vec<Stage>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// `live` or `fixture:DIR`.
    #[arg(long, default_value = "live")]
    pub factcheck: String,
    /// `live` or `fixture:PATH`.
    #[arg(long, default_value = "live")]
    pub pages: String,
    /// Publisher to fetch; may repeat. All publishers when absent.
    #[arg(long = "source", alias = "publisher")]
    pub publishers: Vec<Publisher>,
    #[arg(long)]
    pub start_date: Option<NaiveDate>,
    #[arg(long)]
    pub end_date: Option<NaiveDate>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SnippetsArgs {
    /// Raw store directory; claims are taken from its entries.
    #[arg(long, required_unless_present = "claims", conflicts_with = "claims")]
    pub raw: Option<PathBuf>,
    /// Text file with one claim per line.
    #[arg(long, requires = "exclude_domain")]
    pub claims: Option<PathBuf>,
    /// `live` or `fixture:PATH`.
    #[arg(long)]
    pub search: String,
    /// Removed from results; defaults to each claim's publisher site.
    #[arg(long)]
    pub exclude_domain: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also scrape snippet source pages into this file.
    #[arg(long)]
    pub pages_out: Option<PathBuf>,
    #[arg(long, default_value = "live")]
    pub pages: String,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub articles: PathBuf,
    #[arg(long)]
    pub snippets: Option<PathBuf>,
    #[arg(long, value_parser = parse_evidence, default_value = "article")]
    pub evidence: EvidenceSource,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub publisher: Option<Publisher>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub snippets: PathBuf,
    #[arg(long)]
    pub pages: PathBuf,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: ExpansionStrategy,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    #[arg(long, default_value_t = factlens_core::dataset::DEFAULT_SPLIT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TopicsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub top_terms: Option<usize>,
    #[arg(long)]
    pub min_df: Option<usize>,
    #[arg(long, default_value_t = factlens_core::dataset::DEFAULT_SPLIT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerationArgs {
    /// TOML file with generation settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr", alias = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long = "batch")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_input: Option<usize>,
    #[arg(long)]
    pub max_output: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GenerationArgs {
    fn resolve(&self) -> Result<GenerationConfig> {
        let mut c: GenerationConfig = match &self.config {
            Some(p) => load_toml(p)?,
            None => GenerationConfig::default(),
        };
        if let Some(v) = &self.checkpoint {
            c.checkpoint = v.clone();
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.max_input {
            c.max_input_tokens = v;
        }
        if let Some(v) = self.max_output {
            c.max_output_tokens = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainExplainerArgs {
    /// Training JSONL, or a split directory holding `train.jsonl`.
    #[arg(long, alias = "train")]
    pub data: PathBuf,
    #[command(flatten)]
    pub generation: GenerationArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long, default_value_t = 4)]
    pub beam: usize,
    #[arg(long, default_value_t = 1024)]
    pub max_input: usize,
    #[arg(long, default_value_t = 128)]
    pub max_output: usize,
}

impl DecodeArgs {
    fn config(&self) -> GenerationConfig {
        GenerationConfig {
            beam_width: self.beam,
            max_input_tokens: self.max_input,
            max_output_tokens: self.max_output,
            ..GenerationConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub claim: String,
    /// Evidence article text file.
    #[arg(long, alias = "article", conflicts_with = "snippet")]
    pub evidence: Option<PathBuf>,
    /// Evidence snippet; may repeat.
    #[arg(long)]
    pub snippet: Vec<String>,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummariesArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "pred", alias = "predictions")]
    pub predictions: PathBuf,
    /// Only ROUGE is computed; `all` is accepted as a synonym.
    #[arg(long, value_parser = ["rouge", "all"], default_value = "rouge")]
    pub metric: String,
    /// Directory for `rouge.json` and per-example scores.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "pred-a", alias = "a")]
    pub a: PathBuf,
    #[arg(long = "pred-b", alias = "b")]
    pub b: PathBuf,
    #[arg(long, value_parser = ["paired-t"], default_value = "paired-t")]
    pub test: String,
    #[arg(long, value_parser = parse_alternative, default_value = "two_sided")]
    pub alternative: Alternative,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long = "in", alias = "judgments")]
    pub judgments: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long = "in", alias = "judgments")]
    pub judgments: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    pub threshold: f64,
    #[arg(long, default_value = "overall")]
    pub mode: FilterMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long = "in", alias = "judgments")]
    pub judgments: PathBuf,
    #[arg(long)]
    pub summaries: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    pub threshold: f64,
    #[arg(long, default_value = "overall")]
    pub mode: FilterMode,
    /// `live` or `fixture:PATH`.
    #[arg(long, default_value = "live")]
    pub adjudicator: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// `labels.json` written by `aggregate`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub summaries: PathBuf,
    #[arg(long, default_value_t = 2100)]
    pub train: usize,
    #[arg(long, default_value_t = 521)]
    pub eval: usize,
    #[arg(long, default_value_t = factlens_core::dataset::DEFAULT_SPLIT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub summaries: Option<PathBuf>,
    /// Qualification items (JSONL).
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Overrides the port of `--addr`.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub char_min: Option<usize>,
    #[arg(long)]
    pub char_max: Option<usize>,
    /// TOML file with service settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportJudgmentsArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub annotator: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// TOML file with metric model settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl MetricArgs {
    fn resolve(&self, checkpoint: Option<&str>) -> Result<MetricModelConfig> {
        let mut c: MetricModelConfig = match &self.config {
            Some(p) => load_toml(p)?,
            None => MetricModelConfig::default(),
        };
        if let Some(v) = checkpoint {
            c.checkpoint = v.to_string();
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainMetricArgs {
    /// Directory with `train.jsonl` and `eval.jsonl`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub dimension: Dimension,
    #[arg(long)]
    pub checkpoint: Option<String>,
    #[command(flatten)]
    pub model: MetricArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalMetricArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub dimension: Dimension,
    /// Checkpoints to compare; may repeat.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = factlens_core::significance::DEFAULT_SEEDS, conflicts_with = "runs")]
    pub seeds: Vec<u64>,
    /// Seeds 1..=N.
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long, default_value_t = 0.2)]
    pub eval_fraction: f64,
    #[command(flatten)]
    pub model: MetricArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_evidence(s: &str) -> Result<EvidenceSource, String> {
    serde_plain(s)
}

fn parse_strategy(s: &str) -> Result<ExpansionStrategy, String> {
    match s {
        "em" => Ok(ExpansionStrategy::ExactMatch),
        "ls" => Ok(ExpansionStrategy::LexicalSim),
        other => serde_plain(other),
    }
}

fn parse_alternative(s: &str) -> Result<Alternative, String> {
    serde_plain(s)
}

fn serde_plain<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    Ok(toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn publishers_or_all(p: &[Publisher]) -> Vec<Publisher> {
    if p.is_empty() {
        Publisher::ALL.to_vec()
    } else {
        p.to_vec()
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pipeline(PipelineCommand::Run(a)) => {
            let config = PipelineConfig::load(&a.config)?;
            let manifests = Pipeline::new(config).run(&a.stages)?;
            for m in &manifests {
                println!("{}\t{}", m.stage, m.outputs_hash);
            }
        }
        Command::Ingest(a) => {
            let publishers = publishers_or_all(&a.publishers);
            let window = DateWindow {
                start: a.start_date,
                end: a.end_date,
            };
            let source = stages::factcheck_source(&a.factcheck)?;
            let mut report = stages::ingest_entries(source.as_ref(), &publishers, window, &a.out)?;
            let entries = stages::raw_entries(&a.out.join("raw"), &publishers)?;
            let (articles, counts) = stages::scrape_urls(
                stages::page_fetcher(&a.pages)?,
                entries.iter().map(|e| e.review_url.as_str()),
            )?;
            jsonl::write(a.out.join("articles.jsonl"), &articles)?;
            report.articles = counts;
            write_json(&a.out.join("ingest_report.json"), &report)?;
            print_json(&report)?;
        }
        Command::Snippets(a) => {
            let claims: Vec<(String, String)> = match (&a.raw, &a.claims) {
                (_, Some(file)) => {
                    let domain = a.exclude_domain.clone().unwrap_or_default();
                    std::fs::read_to_string(file)
                        .with_context(|| format!("reading {}", file.display()))?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(|l| (l.to_string(), domain.clone()))
                        .collect()
                }
                (Some(raw), None) => stages::raw_entries(raw, &Publisher::ALL)?
                    .iter()
                    .map(|e| {
                        let domain = a
                            .exclude_domain
                            .clone()
                            .unwrap_or_else(|| e.review_publisher.site().to_string());
                        (e.claim_text.clone(), domain)
                    })
                    .collect(),
                (None, None) => unreachable!("clap requires --raw or --claims"),
            };
            let sets = stages::collect_snippets(stages::search_backend(&a.search)?.as_ref(), &claims)?;
            jsonl::write(&a.out, &sets)?;
            if let Some(out) = &a.pages_out {
                let urls = sets
                    .iter()
                    .flat_map(|s| s.snippets.iter().map(|x| x.source_url.as_str()));
                let (pages, counts) = stages::scrape_urls(stages::page_fetcher(&a.pages)?, urls)?;
                jsonl::write(out, &pages)?;
                print_json(&counts)?;
            }
            eprintln!("{} snippet sets", sets.len());
        }
        Command::BuildDataset(a) => {
            let (records, summary) = stages::build_dataset(
                &a.raw,
                &a.articles,
                a.snippets.as_deref(),
                a.evidence,
                a.mapping.as_deref(),
                a.publisher,
            )?;
            write_dataset(&a.out, &records)?;
            if let Some(r) = &a.report {
                write_json(r, &summary)?;
            }
            print_json(&summary)?;
        }
        Command::Expand(a) => {
            let mut records = read_dataset(&a.dataset)?;
            let sets: Vec<SearchSnippetSet> = jsonl::read(&a.snippets)?;
            let pages: Vec<ScrapedArticle> = jsonl::read(&a.pages)?;
            let report = stages::expand_records(&mut records, &sets, &pages, a.strategy, a.threshold)?;
            write_dataset(&a.out, &records)?;
            print_json(&report)?;
        }
        Command::Split(a) => {
            print_json(&stages::split_to_dir(&a.dataset, a.ratio, a.seed, &a.out)?)?;
        }
        Command::Topics(a) => {
            let mut section = TopicsSection::default();
            if let Some(k) = a.k {
                section.k = k;
            }
            if let Some(n) = a.top_terms {
                section.top_terms = n;
            }
            if let Some(m) = a.min_df {
                section.min_df = m;
            }
            let table = stages::topics(&a.dataset, &section, a.seed)?;
            write_json(&a.out, &table)?;
            for t in &table.topics {
                let terms: Vec<&str> = t.terms.iter().map(|(w, _)| w.as_str()).collect();
                println!("{}\t{}", t.index, terms.join(" "));
            }
        }
        Command::TrainExplainer(a) => {
            let config = a.generation.resolve()?;
            let train = if a.data.is_dir() {
                a.data.join("train.jsonl")
            } else {
                a.data.clone()
            };
            let (_, log) = stages::train_explainer(&train, &config, &a.out)?;
            write_json(&a.out.join("training_log.json"), &log)?;
            println!(
                "initial loss {:.4}, final loss {:.4}",
                log.initial_loss, log.final_loss
            );
        }
        Command::Explain(a) => {
            let explainer = Explainer::load(&a.model)?;
            let evidence = match &a.evidence {
                Some(p) => EvidenceBundle::article(
                    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                ),
                None => EvidenceBundle::snippets(a.snippet.clone()),
            };
            let input = build_input(&a.claim, &evidence, a.decode.max_input)?;
            println!(
                "{}",
                explainer.generate(&input, a.decode.beam, a.decode.max_output)?
            );
        }
        Command::Predict(a) => {
            let predictions = crate::pipeline::predictions_for(&a.model, &a.dataset, &a.decode.config())?;
            jsonl::write(&a.out, &predictions)?;
            eprintln!("{} predictions", predictions.len());
        }
        Command::Summaries(a) => {
            let predictions: Vec<Prediction> = jsonl::read(&a.predictions)?;
            let summaries = stages::summaries_from(&predictions, &read_dataset(&a.dataset)?)?;
            jsonl::write(&a.out, &summaries)?;
        }
        Command::Score(a) => {
            let report = match &a.out {
                Some(out) => stages::score_to_dir(&a.predictions, out)?,
                None => {
                    let s = factlens_core::rouge::corpus_rouge(&a.predictions)?;
                    factlens_core::rouge::RougeReport {
                        rouge1: s.rouge1_f,
                        rouge2: s.rouge2_f,
                        rouge_l: s.rouge_l_f,
                        n: s.n(),
                        per_example_path: String::new(),
                    }
                }
            };
            print_json(&report)?;
        }
        Command::Compare(a) => {
            let report = stages::compare_predictions(&a.a, &a.b, a.alternative)?;
            if let Some(out) = &a.out {
                write_json(out, &report)?;
            }
            print_json(&report)?;
        }
        Command::Agreement(a) => {
            let report = stages::agreement_report(&read_judgments(&a.judgments)?);
            if let Some(out) = &a.out {
                write_json(out, &report)?;
            }
            print_json(&report)?;
        }
        Command::Filter(a) => {
            let judgments = read_judgments(&a.judgments)?;
            let profiles = stages::agreement_report(&judgments).profiles;
            let pool = filter_annotators(&judgments, &profiles, a.threshold, a.mode)?;
            write_json(&a.out, &pool)?;
            print_json(&pool.kept_annotators)?;
        }
        Command::Aggregate(a) => {
            let summaries: Vec<SummaryContext> = stages::read_summaries_file(&a.summaries)?;
            let adjudicator = stages::adjudicator(&a.adjudicator)?;
            let options = AggregateOptions {
                threshold: a.threshold,
                mode: a.mode,
                adjudicator: adjudicator.as_ref(),
            };
            let (_, summary) = stages::aggregate_to_dir(&a.judgments, &summaries, &options, &a.out)?;
            write_json(&a.out.join("aggregate.json"), &summary)?;
            print_json(&summary)?;
        }
        Command::ExportMetricData(a) => {
            let report = read_json(&a.labels)?;
            let summaries = stages::read_summaries_file(&a.summaries)?;
            let split = stages::export_to_dir(&report, &summaries, a.train, a.eval, a.seed, &a.out)?;
            println!("train {} eval {}", split.train.len(), split.eval.len());
        }
        Command::ServeAnnotation(a) => {
            let mut config: ServiceConfig = match &a.config {
                Some(p) => load_toml(p)?,
                None => ServiceConfig::default(),
            };
            if let Some(v) = a.char_min {
                config.char_min = v;
            }
            if let Some(v) = a.char_max {
                config.char_max = v;
            }
            if config.char_min > config.char_max {
                return Err(ConfigError(format!(
                    "char-min {} exceeds char-max {}",
                    config.char_min, config.char_max
                ))
                .into());
            }
            let mut addr = a.addr;
            if let Some(port) = a.port {
                addr.set_port(port);
            }
            let store = Store::open(&a.db, config, Box::new(SystemClock))?;
            if let Some(p) = &a.summaries {
                let (added, skipped) = store.load_summaries(&stages::read_summaries_file(p)?)?;
                tracing::info!(added, skipped, "summaries loaded");
            }
            if let Some(p) = &a.gold {
                let gold: Vec<GoldItem> = jsonl::read(p)?;
                store.load_gold(&gold)?;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(factlens_annotation::serve(Arc::new(store), addr))?;
        }
        Command::ExportJudgments(a) => {
            let store = Store::open(&a.db, ServiceConfig::default(), Box::new(SystemClock))?;
            let judgments = store.judgments(a.annotator.as_deref())?;
            jsonl::write(&a.out, &judgments)?;
            eprintln!("{} judgments", judgments.len());
        }
        Command::TrainMetric(a) => {
            let config = a.model.resolve(a.checkpoint.as_deref())?;
            let report = stages::train_and_eval_metric(&a.data, a.dimension, &config, &a.out)?;
            print_json(&report)?;
        }
        Command::EvalMetric(a) => {
            let model = MetricModel::load(&a.model)?;
            let (train, eval) = stages::read_metric_data(&a.data)?;
            let report = stages::eval_metric(&model, &train, &eval, None)?;
            if let Some(out) = &a.out {
                write_json(out, &report)?;
            }
            print_json(&report)?;
        }
        Command::Significance(a) => {
            let config = a.model.resolve(None)?;
            let seeds: Vec<u64> = match a.runs {
                Some(n) => (1..=n).collect(),
                None => a.seeds.clone(),
            };
            if seeds.len() < 2 {
                return Err(ConfigError("significance needs at least 2 runs".into()).into());
            }
            let report = stages::significance_for(
                &a.data,
                a.dimension,
                &a.checkpoints,
                &config,
                &seeds,
                a.eval_fraction,
            )?;
            if let Some(out) = &a.out {
                write_json(out, &report)?;
            }
            print_json(&report)?;
        }
    }
    Ok(())
}
