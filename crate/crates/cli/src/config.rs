//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use factlens_annotation::ServiceConfig;
use factlens_core::annotation::{Dimension, FilterMode};
use factlens_core::dataset::record::ExpansionStrategy;
use factlens_core::dataset::EvidenceSource;
use factlens_core::ingest::Publisher;
use factlens_core::topics::{LdaConfig, VectorizerConfig};
use factlens_neural::explainer::GenerationConfig;
use factlens_neural::metric_model::MetricModelConfig;
use serde::{Deserialize, Serialize};

use crate::pipeline::Stage;
use crate::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for the split, the metric-data export and the topic model.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Stages run when none are given on the command line.
    #[serde(default)]
    pub stages: Vec<Stage>,
    pub paths: Paths,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub topics: TopicsSection,
    #[serde(default)]
    pub explainer: GenerationConfig,
    #[serde(default)]
    pub annotation: AnnotationSection,
    #[serde(default)]
    pub metric: MetricSection,
    #[serde(default)]
    pub significance: SignificanceSection,
}

fn default_seed() -> u64 {
    factlens_core::dataset::DEFAULT_SPLIT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Root of all stage directories.
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    /// `live` or `fixture:DIR` with one recorded response file per publisher.
    pub factcheck: String,
    /// `live` or `fixture:PATH` with recorded article pages.
    pub pages: String,
    pub publishers: Vec<Publisher>,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    /// Search backend for snippet evidence; unset skips snippet retrieval.
    pub search: Option<String>,
    /// Domain removed from search results; defaults to each entry's
    /// publisher site.
    pub exclude_domain: Option<String>,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            factcheck: "live".into(),
            pages: "live".into(),
            publishers: Publisher::ALL.to_vec(),
            start_date: None,
            end_date: None,
            search: None,
            exclude_domain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub evidence: EvidenceSource,
    /// Verdict mapping TSV; the shipped table when unset.
    pub mapping: Option<PathBuf>,
    pub expansion: Option<ExpansionStrategy>,
    pub ls_threshold: Option<f64>,
    /// Keep only this publisher's records.
    pub publisher: Option<Publisher>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            evidence: EvidenceSource::Article,
            mapping: None,
            expansion: None,
            ls_threshold: None,
            publisher: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub ratio: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { ratio: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopicsSection {
    pub k: usize,
    pub top_terms: usize,
    pub max_features: usize,
    pub max_df: f64,
    pub min_df: usize,
    pub max_iter: usize,
}

impl Default for TopicsSection {
    fn default() -> Self {
        let v = VectorizerConfig::default();
        let l = LdaConfig::default();
        TopicsSection {
            k: l.n_topics,
            top_terms: 10,
            max_features: v.max_features,
            max_df: v.max_df,
            min_df: v.min_df,
            max_iter: l.max_iter,
        }
    }
}

impl TopicsSection {
    pub fn vectorizer(&self) -> VectorizerConfig {
        VectorizerConfig {
            max_features: self.max_features,
            max_df: self.max_df,
            min_df: self.min_df,
            stop_words: Vec::new(),
        }
    }

    pub fn lda(&self, seed: u64) -> LdaConfig {
        LdaConfig {
            n_topics: self.k,
            max_iter: self.max_iter,
            seed,
            ..LdaConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationSection {
    /// Collected judgments (JSONL). Required by the aggregate stage.
    pub judgments: Option<PathBuf>,
    pub threshold: f64,
    pub mode: FilterMode,
    /// `live` or `fixture:PATH`.
    pub adjudicator: String,
    pub train: usize,
    pub eval: usize,
    pub service: ServiceConfig,
}

impl Default for AnnotationSection {
    fn default() -> Self {
        AnnotationSection {
            judgments: None,
            threshold: 0.75,
            mode: FilterMode::Overall,
            adjudicator: "live".into(),
            train: 2100,
            eval: 521,
            service: ServiceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSection {
    pub dimensions: Vec<Dimension>,
    pub model: MetricModelConfig,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection {
            dimensions: Dimension::ALL.to_vec(),
            model: MetricModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignificanceSection {
    /// Encoder checkpoints compared; the metric model's checkpoint when empty.
    pub checkpoints: Vec<String>,
    pub seeds: Vec<u64>,
    pub eval_fraction: f64,
}

impl Default for SignificanceSection {
    fn default() -> Self {
        SignificanceSection {
            checkpoints: Vec::new(),
            seeds: factlens_core::significance::DEFAULT_SEEDS.to_vec(),
            eval_fraction: 0.2,
        }
    }
}

/// Relative paths inside `spec` (`fixture:PATH`) resolve against `base`.
fn resolve_spec(spec: &mut String, base: &Path) {
    if let Some(p) = spec.strip_prefix("fixture:") {
        let full = base.join(p);
        *spec = format!("fixture:{}", full.display());
    }
}

fn resolve_path(p: &mut PathBuf, base: &Path) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

/// Checkpoint names that point at files or directories resolve against
/// `base`; registered family names are left alone.
fn resolve_checkpoint(name: &mut String, base: &Path) {
    let candidate = base.join(&*name);
    if Path::new(name).is_relative() && candidate.exists() {
        *name = candidate.display().to_string();
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`; relative paths in the file resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut config =
            Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        resolve_path(&mut self.paths.out, base);
        resolve_spec(&mut self.ingest.factcheck, base);
        resolve_spec(&mut self.ingest.pages, base);
        if let Some(s) = &mut self.ingest.search {
            resolve_spec(s, base);
        }
        if let Some(p) = &mut self.dataset.mapping {
            resolve_path(p, base);
        }
        if let Some(p) = &mut self.annotation.judgments {
            resolve_path(p, base);
        }
        resolve_spec(&mut self.annotation.adjudicator, base);
        resolve_checkpoint(&mut self.explainer.checkpoint, base);
        resolve_checkpoint(&mut self.metric.model.checkpoint, base);
        for c in &mut self.significance.checkpoints {
            resolve_checkpoint(c, base);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError(msg));
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return bad(format!("split.ratio {} must lie in (0, 1)", self.split.ratio));
        }
        if !(0.0..=1.0).contains(&self.annotation.threshold) {
            return bad(format!(
                "annotation.threshold {} outside [0, 1]",
                self.annotation.threshold
            ));
        }
        if self.ingest.publishers.is_empty() {
            return bad("ingest.publishers is empty".into());
        }
        if self.dataset.expansion.is_some() && self.dataset.evidence != EvidenceSource::Snippets {
            return bad("dataset.expansion needs dataset.evidence = \"snippets\"".into());
        }
        if self.dataset.evidence == EvidenceSource::Snippets && self.ingest.search.is_none() {
            return bad("snippet evidence needs ingest.search".into());
        }
        if self.significance.seeds.len() < 2 {
            return bad("significance.seeds needs at least 2 entries".into());
        }
        if self.topics.k == 0 {
            return bad("topics.k must be positive".into());
        }
        self.explainer
            .validate()
            .map_err(|e| ConfigError(format!("explainer: {e}")))?;
        self.metric
            .model
            .validate()
            .map_err(|e| ConfigError(format!("metric.model: {e}")))?;
        Ok(())
    }

    /// The effective configuration as written next to every stage output.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
