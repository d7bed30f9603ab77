use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five rated dimensions. The first four are binary questions; the
/// first three are objective (checkable against the article).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    ArticleContradiction,
    SelfContradiction,
    Hallucination,
    Convincingness,
    Quality,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::ArticleContradiction,
        Dimension::SelfContradiction,
        Dimension::Hallucination,
        Dimension::Convincingness,
        Dimension::Quality,
    ];

    pub const BINARY: [Dimension; 4] = [
        Dimension::ArticleContradiction,
        Dimension::SelfContradiction,
        Dimension::Hallucination,
        Dimension::Convincingness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::ArticleContradiction => "article_contradiction",
            Dimension::SelfContradiction => "self_contradiction",
            Dimension::Hallucination => "hallucination",
            Dimension::Convincingness => "convincingness",
            Dimension::Quality => "quality",
        }
    }

    pub fn is_binary(self) -> bool {
        self != Dimension::Quality
    }

    pub fn is_objective(self) -> bool {
        matches!(
            self,
            Dimension::ArticleContradiction | Dimension::SelfContradiction | Dimension::Hallucination
        )
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown dimension {s:?}")))
    }
}

/// One annotator's rating of one generated explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentRecord {
    pub summary_id: String,
    pub annotator_id: String,
    #[serde(rename = "q1")]
    pub article_contradiction: bool,
    #[serde(rename = "q2")]
    pub self_contradiction: bool,
    #[serde(rename = "q3")]
    pub hallucination: bool,
    #[serde(rename = "q4")]
    pub convincingness: bool,
    /// Overall rating normalized to [0, 1].
    #[serde(rename = "quality")]
    pub overall_quality: f64,
    #[serde(rename = "ts")]
    pub timestamp: DateTime<Utc>,
}

impl JudgmentRecord {
    pub fn answer(&self, dim: Dimension) -> Option<bool> {
        match dim {
            Dimension::ArticleContradiction => Some(self.article_contradiction),
            Dimension::SelfContradiction => Some(self.self_contradiction),
            Dimension::Hallucination => Some(self.hallucination),
            Dimension::Convincingness => Some(self.convincingness),
            Dimension::Quality => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.summary_id.trim().is_empty() || self.annotator_id.trim().is_empty() {
            return Err(Error::InvalidInput(
                "judgment needs summary and annotator ids".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.overall_quality) {
            return Err(Error::InvalidInput(format!(
                "quality {} outside [0, 1]",
                self.overall_quality
            )));
        }
        Ok(())
    }
}

pub fn read_judgments(path: impl AsRef<std::path::Path>) -> Result<Vec<JudgmentRecord>> {
    let records: Vec<JudgmentRecord> = crate::jsonl::read(path)?;
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}

/// Summary under annotation: the claim, its evidence article, the gold
/// verdict and the generated explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryContext {
    pub summary_id: String,
    pub claim: String,
    #[serde(default)]
    pub verdict: String,
    pub article: String,
    pub explanation: String,
}

pub fn read_summaries(path: impl AsRef<std::path::Path>) -> Result<Vec<SummaryContext>> {
    crate::jsonl::read(path)
}
