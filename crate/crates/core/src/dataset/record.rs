use serde::{Deserialize, Serialize};

use crate::dataset::verdict::NominalVerdict;
use crate::error::{Error, Result};
use crate::ingest::Publisher;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Article,
    Snippets,
    SnippetsExpanded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionStrategy {
    None,
    ExactMatch,
    LexicalSim,
}

/// Evidence handed to the generator: a full article or ranked snippets.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceBundle {
    pub kind: EvidenceKind,
    pub article_text: Option<String>,
    pub snippets: Option<Vec<String>>,
    pub expansion_strategy: Option<ExpansionStrategy>,
    pub ls_threshold: Option<f64>,
}

impl EvidenceBundle {
    pub fn article(text: impl Into<String>) -> Self {
        EvidenceBundle {
            kind: EvidenceKind::Article,
            article_text: Some(text.into()),
            snippets: None,
            expansion_strategy: None,
            ls_threshold: None,
        }
    }

    pub fn snippets(snippets: Vec<String>) -> Self {
        EvidenceBundle {
            kind: EvidenceKind::Snippets,
            article_text: None,
            snippets: Some(snippets),
            expansion_strategy: None,
            ls_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EvidenceKind::Article if self.article_text.is_none() => Err(Error::InvalidInput(
                "article evidence without article text".into(),
            )),
            EvidenceKind::Snippets | EvidenceKind::SnippetsExpanded if self.snippets.is_none() => {
                Err(Error::InvalidInput("snippet evidence without snippets".into()))
            }
            _ if self.expansion_strategy == Some(ExpansionStrategy::LexicalSim)
                && self.ls_threshold.is_none() =>
            {
                Err(Error::InvalidInput(
                    "lexical-similarity expansion without a threshold".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Evidence as the generator sees it: article text, or snippets joined
    /// by newlines.
    pub fn text(&self) -> String {
        match self.kind {
            EvidenceKind::Article => self.article_text.clone().unwrap_or_default(),
            EvidenceKind::Snippets | EvidenceKind::SnippetsExpanded => {
                self.snippets.as_deref().unwrap_or_default().join("\n")
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        match self.kind {
            EvidenceKind::Article => self.article_text.as_deref().is_none_or(|t| t.trim().is_empty()),
            _ => self
                .snippets
                .as_deref()
                .is_none_or(|s| s.iter().all(|x| x.trim().is_empty())),
        }
    }
}

/// One example of the explanation dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimRecord {
    pub id: String,
    pub claim: String,
    pub evidence: EvidenceBundle,
    pub verdict_text: String,
    pub explanation: String,
    pub publisher: Publisher,
    pub nominal_label: Option<NominalVerdict>,
}

/// On-disk form of a [`ClaimRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetLine {
    pub id: String,
    pub claim: String,
    pub evidence_kind: EvidenceKind,
    pub article: Option<String>,
    pub snippets: Option<Vec<String>>,
    pub verdict: String,
    pub explanation: String,
    pub publisher: Publisher,
    pub nominal_label: Option<NominalVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion_strategy: Option<ExpansionStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ls_threshold: Option<f64>,
}

impl From<&ClaimRecord> for DatasetLine {
    fn from(r: &ClaimRecord) -> Self {
        DatasetLine {
            id: r.id.clone(),
            claim: r.claim.clone(),
            evidence_kind: r.evidence.kind,
            article: r.evidence.article_text.clone(),
            snippets: r.evidence.snippets.clone(),
            verdict: r.verdict_text.clone(),
            explanation: r.explanation.clone(),
            publisher: r.publisher,
            nominal_label: r.nominal_label,
            expansion_strategy: r.evidence.expansion_strategy,
            ls_threshold: r.evidence.ls_threshold,
        }
    }
}

impl TryFrom<DatasetLine> for ClaimRecord {
    type Error = Error;

    fn try_from(line: DatasetLine) -> Result<Self> {
        let record = ClaimRecord {
            id: line.id,
            claim: line.claim,
            evidence: EvidenceBundle {
                kind: line.evidence_kind,
                article_text: line.article,
                snippets: line.snippets,
                expansion_strategy: line.expansion_strategy,
                ls_threshold: line.ls_threshold,
            },
            verdict_text: line.verdict,
            explanation: line.explanation,
            publisher: line.publisher,
            nominal_label: line.nominal_label,
        };
        record.validate()?;
        Ok(record)
    }
}

impl ClaimRecord {
    pub fn validate(&self) -> Result<()> {
        if self.claim.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "record {} has an empty claim",
                self.id
            )));
        }
        if self.explanation.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "record {} has an empty explanation",
                self.id
            )));
        }
        self.evidence.validate()
    }
}

pub fn read_dataset(path: impl AsRef<std::path::Path>) -> Result<Vec<ClaimRecord>> {
    crate::jsonl::read::<DatasetLine>(path)?
        .into_iter()
        .map(ClaimRecord::try_from)
        .collect()
}

pub fn write_dataset(path: impl AsRef<std::path::Path>, records: &[ClaimRecord]) -> Result<()> {
    let lines: Vec<DatasetLine> = records.iter().map(DatasetLine::from).collect();
    crate::jsonl::write(path, &lines)
}
