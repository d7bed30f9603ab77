//! Append-only raw store: one `{publisher}.jsonl` file per source plus a
//! `{publisher}.meta.json` sidecar holding the last fetch time.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Publisher, RawFactCheckEntry};
use crate::error::Result;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub publisher: Publisher,
    pub fetched_at: DateTime<Utc>,
    pub entries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PersistReport {
    pub added: usize,
    pub already_present: usize,
}

#[derive(Debug, Clone)]
pub struct RawStore {
    dir: PathBuf,
}

impl RawStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RawStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries_path(&self, publisher: Publisher) -> PathBuf {
        self.dir.join(format!("{publisher}.jsonl"))
    }

    pub fn meta_path(&self, publisher: Publisher) -> PathBuf {
        self.dir.join(format!("{publisher}.meta.json"))
    }

    pub fn load(&self, publisher: Publisher) -> Result<Vec<RawFactCheckEntry>> {
        jsonl::read_or_empty(self.entries_path(publisher))
    }

    /// Every source's entries, in publisher order.
    pub fn load_all(&self) -> Result<Vec<RawFactCheckEntry>> {
        let mut out = Vec::new();
        for p in Publisher::ALL {
            out.extend(self.load(p)?);
        }
        Ok(out)
    }

    /// Appends entries not already stored. Existing lines are never
    /// rewritten, so replaying the same responses leaves the file unchanged.
    pub fn persist(
        &self,
        publisher: Publisher,
        entries: &[RawFactCheckEntry],
        fetched_at: DateTime<Utc>,
    ) -> Result<PersistReport> {
        let existing = self.load(publisher)?;
        let mut seen: HashSet<(String, String)> = existing
            .iter()
            .map(|e| (e.claim_text.clone(), e.review_url.clone()))
            .collect();
        let fresh: Vec<&RawFactCheckEntry> = entries
            .iter()
            .filter(|e| seen.insert((e.claim_text.clone(), e.review_url.clone())))
            .collect();
        let report = PersistReport {
            added: fresh.len(),
            already_present: entries.len() - fresh.len(),
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| crate::Error::io(&self.dir, e))?;
        let path = self.entries_path(publisher);
        if !fresh.is_empty() || !path.exists() {
            jsonl::append(&path, fresh)?;
        }
        jsonl::write_json(
            self.meta_path(publisher),
            &StoreMeta {
                publisher,
                fetched_at,
                entries: existing.len() + report.added,
            },
        )?;
        Ok(report)
    }
}
