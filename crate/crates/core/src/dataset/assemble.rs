use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::record::{ClaimRecord, EvidenceBundle};
use super::verdict::VerdictMapping;
use crate::error::Result;
use crate::ingest::scrape::{FetchStatus, ScrapedArticle};
use crate::ingest::snippets::SearchSnippetSet;
use crate::ingest::store::RawStore;
use crate::ingest::{Publisher, RawFactCheckEntry};
use crate::jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    #[default]
    Article,
    Snippets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    InvalidEntry,
    MissingArticle,
    ArticleFetchFailed,
    MissingSnippets,
    EmptyExplanation,
}

/// Counts of assembled and dropped entries.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildReport {
    pub entries: usize,
    pub records: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    pub per_publisher: BTreeMap<Publisher, usize>,
}

impl BuildReport {
    fn drop(&mut self, reason: DropReason, entry: &RawFactCheckEntry) {
        tracing::warn!(url = %entry.review_url, ?reason, "dropping entry");
        *self.dropped.entry(reason).or_insert(0) += 1;
    }

    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

/// Stable record id derived from publisher, claim and review URL.
pub fn record_id(entry: &RawFactCheckEntry) -> String {
    let mut h = Sha256::new();
    h.update(entry.claim_text.as_bytes());
    h.update([0]);
    h.update(entry.review_url.as_bytes());
    let digest = hex::encode(h.finalize());
    format!("{}-{}", entry.review_publisher, &digest[..12])
}

/// Joins raw entries with their evidence. Entries without usable evidence
/// are dropped and counted; `nominal_label` is filled for factcheck entries.
pub fn assemble_records(
    entries: &[RawFactCheckEntry],
    articles: &HashMap<String, ScrapedArticle>,
    snippets: &HashMap<String, SearchSnippetSet>,
    source: EvidenceSource,
    mapping: &VerdictMapping,
) -> (Vec<ClaimRecord>, BuildReport) {
    let mut report = BuildReport {
        entries: entries.len(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for entry in entries {
        if entry.validate().is_err() {
            report.drop(DropReason::InvalidEntry, entry);
            continue;
        }
        let explanation = entry.explanation().trim();
        if explanation.is_empty() {
            report.drop(DropReason::EmptyExplanation, entry);
            continue;
        }
        let evidence = match source {
            EvidenceSource::Article => match articles.get(&entry.review_url) {
                None => {
                    report.drop(DropReason::MissingArticle, entry);
                    continue;
                }
                Some(a) if a.fetch_status != FetchStatus::Ok || a.char_count == 0 => {
                    report.drop(DropReason::ArticleFetchFailed, entry);
                    continue;
                }
                Some(a) => EvidenceBundle::article(a.body_text.clone()),
            },
            EvidenceSource::Snippets => match snippets.get(&entry.claim_text) {
                None => {
                    report.drop(DropReason::MissingSnippets, entry);
                    continue;
                }
                Some(set) => EvidenceBundle::snippets(set.texts()),
            },
        };
        let verdict_text = entry.verdict_text().to_string();
        let nominal_label =
            (entry.review_publisher == Publisher::Factcheck).then(|| mapping.normalize(&verdict_text));
        *report.per_publisher.entry(entry.review_publisher).or_insert(0) += 1;
        records.push(ClaimRecord {
            id: record_id(entry),
            claim: entry.claim_text.clone(),
            evidence,
            verdict_text,
            explanation: explanation.to_string(),
            publisher: entry.review_publisher,
            nominal_label,
        });
    }
    report.records = records.len();
    (records, report)
}

/// File-based wrapper: raw store directory, scraped articles JSONL and an
/// optional snippet-set JSONL.
pub fn assemble_dataset(
    raw_store: &Path,
    articles: &Path,
    snippets: Option<&Path>,
    source: EvidenceSource,
    mapping: &VerdictMapping,
) -> Result<(Vec<ClaimRecord>, BuildReport)> {
    let entries = RawStore::new(raw_store).load_all()?;
    let articles: HashMap<String, ScrapedArticle> = jsonl::read_or_empty::<ScrapedArticle>(articles)?
        .into_iter()
        .map(|a| (a.url.clone(), a))
        .collect();
    let snippets: HashMap<String, SearchSnippetSet> = match snippets {
        Some(p) => jsonl::read_or_empty::<SearchSnippetSet>(p)?
            .into_iter()
            .map(|s| (s.claim_text.clone(), s))
            .collect(),
        None => HashMap::new(),
    };
    Ok(assemble_records(&entries, &articles, &snippets, source, mapping))
}
