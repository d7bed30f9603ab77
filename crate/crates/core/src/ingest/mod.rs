//! Fact-check API ingestion, article scraping and search snippets.

pub mod factcheck;
pub mod retry;
pub mod scrape;
pub mod snippets;
pub mod store;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Publisher {
    Bbc,
    Fullfact,
    Factcheck,
}

impl Publisher {
    pub const ALL: [Publisher; 3] = [Publisher::Bbc, Publisher::Fullfact, Publisher::Factcheck];

    pub fn as_str(self) -> &'static str {
        match self {
            Publisher::Bbc => "bbc",
            Publisher::Fullfact => "fullfact",
            Publisher::Factcheck => "factcheck",
        }
    }
}

impl fmt::Display for Publisher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Publisher {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Publisher::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown publisher {s:?}")))
    }
}

impl Publisher {
    /// Site filter used when querying the fact-check API.
    pub fn site(self) -> &'static str {
        match self {
            Publisher::Bbc => "bbc.co.uk",
            Publisher::Fullfact => "fullfact.org",
            Publisher::Factcheck => "factcheck.org",
        }
    }

    /// Whether explanations come from the review title rather than the
    /// textual verdict.
    pub fn title_is_explanation(self) -> bool {
        matches!(self, Publisher::Factcheck)
    }
}

/// One fact-check review as returned by the API, flattened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFactCheckEntry {
    #[serde(rename = "claim")]
    pub claim_text: String,
    pub claimant: Option<String>,
    pub claim_date: Option<NaiveDate>,
    #[serde(rename = "publisher")]
    pub review_publisher: Publisher,
    #[serde(rename = "url")]
    pub review_url: String,
    #[serde(rename = "title")]
    pub review_title: String,
    #[serde(rename = "verdict")]
    pub textual_verdict: Option<String>,
    #[serde(rename = "language")]
    pub language_code: String,
}

impl RawFactCheckEntry {
    pub fn validate(&self) -> Result<()> {
        if self.claim_text.trim().is_empty() {
            return Err(Error::InvalidInput("entry has an empty claim".into()));
        }
        if self.review_url.trim().is_empty() {
            return Err(Error::InvalidInput("entry has an empty review url".into()));
        }
        url::Url::parse(&self.review_url)
            .map_err(|e| Error::InvalidInput(format!("review url {:?}: {e}", self.review_url)))?;
        Ok(())
    }

    pub fn dedup_key(&self) -> (&str, &str) {
        (&self.claim_text, &self.review_url)
    }

    /// Free-form verdict string for label normalization: the textual verdict,
    /// or the title when the API omits it.
    pub fn verdict_text(&self) -> &str {
        self.textual_verdict
            .as_deref()
            .filter(|v| !v.trim().is_empty())
            .unwrap_or(&self.review_title)
    }

    /// Ground-truth explanation under the publisher rule.
    pub fn explanation(&self) -> &str {
        if self.review_publisher.title_is_explanation() {
            &self.review_title
        } else {
            self.textual_verdict.as_deref().unwrap_or_default()
        }
    }
}

/// Inclusive claim-date window; open ends are unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DateWindow {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl DateWindow {
    /// Entries without a claim date are kept.
    pub fn contains(&self, date: Option<NaiveDate>) -> bool {
        let Some(d) = date else { return true };
        self.start.is_none_or(|s| d >= s) && self.end.is_none_or(|e| d <= e)
    }
}

/// Drops later duplicates by (claim, url), keeping first-seen order.
pub fn dedup_entries(entries: impl IntoIterator<Item = RawFactCheckEntry>) -> Vec<RawFactCheckEntry> {
    let mut seen = std::collections::HashSet::new();
    entries
        .into_iter()
        .filter(|e| seen.insert((e.claim_text.clone(), e.review_url.clone())))
        .collect()
}

/// Backend selector of the form `live` or `fixture:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Live,
    Fixture(std::path::PathBuf),
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "live" => Ok(BackendSpec::Live),
            other => other
                .strip_prefix("fixture:")
                .filter(|p| !p.is_empty())
                .map(|p| BackendSpec::Fixture(p.into()))
                .ok_or_else(|| Error::InvalidInput(format!("backend {s:?} is not `live` or `fixture:PATH`"))),
        }
    }
}

impl BackendSpec {
    /// Parses the named environment variable; unset means `None`.
    pub fn from_env(var: &str) -> Result<Option<Self>> {
        std::env::var(var).ok().map(|v| v.parse()).transpose()
    }
}
