//! Stage graph and runner. Each stage writes into `out/<stage>/` together
//! with the effective configuration and a manifest of input and output
//! hashes.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use factlens_core::dataset::{read_dataset, write_dataset, EvidenceSource};
use factlens_core::ingest::scrape::ScrapedArticle;
use factlens_core::ingest::snippets::SearchSnippetSet;
use factlens_core::ingest::DateWindow;
use factlens_core::jsonl;
use factlens_core::rouge::Prediction;
use factlens_neural::explainer::Explainer;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::manifest::{Manifest, CONFIG_ECHO_FILE};
use crate::stages::{self, write_json, AggregateOptions};
use crate::{ConfigError, MissingArtifact, MissingArtifacts};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Build,
    Split,
    Topics,
    TrainExplainer,
    Score,
    Aggregate,
    TrainMetric,
    Significance,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Build,
        Stage::Split,
        Stage::Topics,
        Stage::TrainExplainer,
        Stage::Score,
        Stage::Aggregate,
        Stage::TrainMetric,
        Stage::Significance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Build => "build",
            Stage::Split => "split",
            Stage::Topics => "topics",
            Stage::TrainExplainer => "train-explainer",
            Stage::Score => "score",
            Stage::Aggregate => "aggregate",
            Stage::TrainMetric => "train-metric",
            Stage::Significance => "significance",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output locations of every stage under one root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.as_str())
    }

    pub fn raw(&self) -> PathBuf {
        self.dir(Stage::Ingest).join("raw")
    }
    pub fn articles(&self) -> PathBuf {
        self.dir(Stage::Ingest).join("articles.jsonl")
    }
    pub fn snippets(&self) -> PathBuf {
        self.dir(Stage::Ingest).join("snippets.jsonl")
    }
    pub fn snippet_pages(&self) -> PathBuf {
        self.dir(Stage::Ingest).join("snippet_pages.jsonl")
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir(Stage::Build).join("dataset.jsonl")
    }
    pub fn train(&self) -> PathBuf {
        self.dir(Stage::Split).join("train.jsonl")
    }
    pub fn test(&self) -> PathBuf {
        self.dir(Stage::Split).join("test.jsonl")
    }
    pub fn model(&self) -> PathBuf {
        self.dir(Stage::TrainExplainer).join("model")
    }
    pub fn predictions(&self) -> PathBuf {
        self.dir(Stage::TrainExplainer).join("predictions.jsonl")
    }
    pub fn summaries(&self) -> PathBuf {
        self.dir(Stage::TrainExplainer).join("summaries.jsonl")
    }
    pub fn metric_data(&self) -> PathBuf {
        self.dir(Stage::Aggregate).join("metric_data")
    }
}

/// Upstream artifacts read by `stage`, labelled, with the stage producing
/// each. External inputs (recorded responses, judgments) are not listed.
pub fn required_artifacts(
    stage: Stage,
    config: &PipelineConfig,
    layout: &Layout,
) -> Vec<(&'static str, PathBuf, Stage)> {
    match stage {
        Stage::Ingest => Vec::new(),
        Stage::Build => {
            let mut v = vec![
                ("raw", layout.raw(), Stage::Ingest),
                ("articles.jsonl", layout.articles(), Stage::Ingest),
            ];
            if config.dataset.evidence == EvidenceSource::Snippets {
                v.push(("snippets.jsonl", layout.snippets(), Stage::Ingest));
            }
            if config.dataset.expansion.is_some() {
                v.push(("snippet_pages.jsonl", layout.snippet_pages(), Stage::Ingest));
            }
            v
        }
        Stage::Split | Stage::Topics => vec![("dataset.jsonl", layout.dataset(), Stage::Build)],
        Stage::TrainExplainer => vec![
            ("train.jsonl", layout.train(), Stage::Split),
            ("test.jsonl", layout.test(), Stage::Split),
        ],
        Stage::Score => vec![("predictions.jsonl", layout.predictions(), Stage::TrainExplainer)],
        Stage::Aggregate => vec![("summaries.jsonl", layout.summaries(), Stage::TrainExplainer)],
        Stage::TrainMetric | Stage::Significance => {
            vec![("metric_data", layout.metric_data(), Stage::Aggregate)]
        }
    }
}

/// Seed recorded in a stage's manifest.
pub fn stage_seed(stage: Stage, config: &PipelineConfig) -> u64 {
    match stage {
        Stage::TrainExplainer => config.explainer.seed,
        Stage::TrainMetric | Stage::Significance => config.metric.model.seed,
        _ => config.seed,
    }
}

/// Orders the requested stages canonically; an empty request means the
/// configured stages, or all of them.
pub fn plan(requested: &[Stage], config: &PipelineConfig) -> Vec<Stage> {
    let chosen: BTreeSet<Stage> = if !requested.is_empty() {
        requested.iter().copied().collect()
    } else if !config.stages.is_empty() {
        config.stages.iter().copied().collect()
    } else {
        Stage::ALL.into_iter().collect()
    };
    chosen.into_iter().collect()
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub layout: Layout,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        let layout = Layout::new(&config.paths.out);
        Pipeline { config, layout }
    }

    /// Upstream artifacts that neither exist nor come from an earlier
    /// stage of `stages`.
    pub fn preflight(&self, stages: &[Stage]) -> Result<(), MissingArtifacts> {
        let mut missing = Vec::new();
        for (i, &stage) in stages.iter().enumerate() {
            for (_, path, producer) in required_artifacts(stage, &self.config, &self.layout) {
                if !path.exists() && !stages[..i].contains(&producer) {
                    missing.push(MissingArtifact { path, producer });
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(MissingArtifacts(missing))
        }
    }

    pub fn run(&self, requested: &[Stage]) -> Result<Vec<Manifest>> {
        let stages = plan(requested, &self.config);
        if stages.contains(&Stage::Aggregate) && self.config.annotation.judgments.is_none() {
            return Err(ConfigError("the aggregate stage needs annotation.judgments".into()).into());
        }
        self.preflight(&stages)?;
        let mut manifests = Vec::new();
        for stage in stages {
            manifests.push(self.run_stage(stage)?);
        }
        Ok(manifests)
    }

    /// Runs one stage after checking its upstream artifacts, then writes the
    /// configuration echo and the manifest.
    pub fn run_stage(&self, stage: Stage) -> Result<Manifest> {
        let inputs = required_artifacts(stage, &self.config, &self.layout);
        for (_, path, producer) in &inputs {
            if !path.exists() {
                return Err(MissingArtifact {
                    path: path.clone(),
                    producer: *producer,
                }
                .into());
            }
        }
        let dir = self.layout.dir(stage);
        if stage != Stage::Ingest && dir.exists() {
            std::fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        std::fs::create_dir_all(&dir)?;
        tracing::info!(stage = %stage, dir = %dir.display(), "running stage");
        let mut labelled: Vec<(String, PathBuf)> =
            inputs.into_iter().map(|(l, p, _)| (l.to_string(), p)).collect();
        labelled.extend(
            self.execute(stage, &dir)
                .with_context(|| format!("stage `{stage}` failed"))?,
        );
        std::fs::write(dir.join(CONFIG_ECHO_FILE), self.config.to_toml())?;
        let refs: Vec<(&str, &Path)> = labelled.iter().map(|(l, p)| (l.as_str(), p.as_path())).collect();
        let manifest = Manifest::build(stage.as_str(), stage_seed(stage, &self.config), &refs, &dir)?;
        manifest.write(&dir)?;
        Ok(manifest)
    }

    /// Stage body. Returns external inputs to record in the manifest.
    fn execute(&self, stage: Stage, dir: &Path) -> Result<Vec<(String, PathBuf)>> {
        let c = &self.config;
        let l = &self.layout;
        let mut external = Vec::new();
        match stage {
            Stage::Ingest => {
                let source = stages::factcheck_source(&c.ingest.factcheck)?;
                let window = DateWindow {
                    start: c.ingest.start_date,
                    end: c.ingest.end_date,
                };
                let mut report = stages::ingest_entries(source.as_ref(), &c.ingest.publishers, window, dir)?;
                let entries = stages::raw_entries(&l.raw(), &c.ingest.publishers)?;
                let (articles, counts) = stages::scrape_urls(
                    stages::page_fetcher(&c.ingest.pages)?,
                    entries.iter().map(|e| e.review_url.as_str()),
                )?;
                jsonl::write(l.articles(), &articles)?;
                report.articles = counts;
                if let Some(search) = &c.ingest.search {
                    let backend = stages::search_backend(search)?;
                    let claims: Vec<(String, String)> = entries
                        .iter()
                        .map(|e| {
                            let domain = c
                                .ingest
                                .exclude_domain
                                .clone()
                                .unwrap_or_else(|| e.review_publisher.site().to_string());
                            (e.claim_text.clone(), domain)
                        })
                        .collect();
                    let sets = stages::collect_snippets(backend.as_ref(), &claims)?;
                    jsonl::write(l.snippets(), &sets)?;
                    if c.dataset.expansion.is_some() {
                        let urls = sets
                            .iter()
                            .flat_map(|s| s.snippets.iter().map(|x| x.source_url.as_str()));
                        let (pages, _) = stages::scrape_urls(stages::page_fetcher(&c.ingest.pages)?, urls)?;
                        jsonl::write(l.snippet_pages(), &pages)?;
                    }
                }
                write_json(&dir.join("ingest_report.json"), &report)?;
            }
            Stage::Build => {
                let snippets = (c.dataset.evidence == EvidenceSource::Snippets).then(|| l.snippets());
                let (mut records, summary) = stages::build_dataset(
                    &l.raw(),
                    &l.articles(),
                    snippets.as_deref(),
                    c.dataset.evidence,
                    c.dataset.mapping.as_deref(),
                    c.dataset.publisher,
                )?;
                if let Some(p) = &c.dataset.mapping {
                    external.push(("mapping".to_string(), p.clone()));
                }
                if let Some(strategy) = c.dataset.expansion {
                    let sets: Vec<SearchSnippetSet> = jsonl::read(l.snippets())?;
                    let pages: Vec<ScrapedArticle> = jsonl::read(l.snippet_pages())?;
                    let report = stages::expand_records(
                        &mut records,
                        &sets,
                        &pages,
                        strategy,
                        c.dataset.ls_threshold,
                    )?;
                    write_json(&dir.join("expansion.json"), &report)?;
                }
                write_dataset(l.dataset(), &records)?;
                write_json(&dir.join("build_report.json"), &summary)?;
            }
            Stage::Split => {
                stages::split_to_dir(&l.dataset(), c.split.ratio, c.seed, dir)?;
            }
            Stage::Topics => {
                let table = stages::topics(&l.dataset(), &c.topics, c.seed)?;
                write_json(&dir.join("topics.json"), &table)?;
            }
            Stage::TrainExplainer => {
                let (explainer, log) = stages::train_explainer(&l.train(), &c.explainer, &l.model())?;
                write_json(&dir.join("training_log.json"), &log)?;
                let test = read_dataset(l.test())?;
                let predictions = stages::predict(&explainer, &test, &c.explainer)?;
                jsonl::write(l.predictions(), &predictions)?;
                let summaries = stages::summaries_from(&predictions, &test)?;
                jsonl::write(l.summaries(), &summaries)?;
            }
            Stage::Score => {
                stages::score_to_dir(&l.predictions(), dir)?;
            }
            Stage::Aggregate => {
                let judgments =
                    c.annotation.judgments.clone().ok_or_else(|| {
                        ConfigError("the aggregate stage needs annotation.judgments".into())
                    })?;
                if !judgments.exists() {
                    anyhow::bail!("judgments file {} does not exist", judgments.display());
                }
                external.push(("judgments.jsonl".to_string(), judgments.clone()));
                let summaries = stages::read_summaries_file(&l.summaries())?;
                let adjudicator = stages::adjudicator(&c.annotation.adjudicator)?;
                let options = AggregateOptions {
                    threshold: c.annotation.threshold,
                    mode: c.annotation.mode,
                    adjudicator: adjudicator.as_ref(),
                };
                let (report, summary) = stages::aggregate_to_dir(&judgments, &summaries, &options, dir)?;
                write_json(&dir.join("aggregate.json"), &summary)?;
                stages::export_to_dir(
                    &report,
                    &summaries,
                    c.annotation.train,
                    c.annotation.eval,
                    c.seed,
                    &l.metric_data(),
                )?;
            }
            Stage::TrainMetric => {
                let mut headline = std::collections::BTreeMap::new();
                for &dim in &c.metric.dimensions {
                    let report = stages::train_and_eval_metric(
                        &l.metric_data(),
                        dim,
                        &c.metric.model,
                        &dir.join(dim.as_str()),
                    )?;
                    headline.insert(dim, report.eval.primary());
                }
                write_json(&dir.join("metrics.json"), &headline)?;
            }
            Stage::Significance => {
                let checkpoints = if c.significance.checkpoints.is_empty() {
                    vec![c.metric.model.checkpoint.clone()]
                } else {
                    c.significance.checkpoints.clone()
                };
                for &dim in &c.metric.dimensions {
                    let report = stages::significance_for(
                        &l.metric_data(),
                        dim,
                        &checkpoints,
                        &c.metric.model,
                        &c.significance.seeds,
                        c.significance.eval_fraction,
                    )?;
                    write_json(&dir.join(format!("{}.json", dim.as_str())), &report)?;
                }
            }
        }
        Ok(external)
    }
}

/// Loads a trained explainer and regenerates predictions for `dataset`.
pub fn predictions_for(
    model: &Path,
    dataset: &Path,
    config: &factlens_neural::explainer::GenerationConfig,
) -> Result<Vec<Prediction>> {
    let explainer = Explainer::load(model)?;
    stages::predict(&explainer, &read_dataset(dataset)?, config)
}
