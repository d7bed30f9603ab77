//! Client for the claim-search endpoint of the fact-check tools API.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde_json::Value;

use super::retry::{RetryPolicy, Sleeper};
use super::{dedup_entries, DateWindow, Publisher, RawFactCheckEntry};
use crate::error::{Error, Result};

pub const DEFAULT_ENDPOINT: &str = "https://factchecktools.googleapis.com/v1alpha1/claims:search";

/// Source of raw API response pages.
pub trait FactCheckSource {
    /// Page of results for `publisher`; `page_token` is `None` for the first.
    fn page(&self, publisher: Publisher, page_token: Option<&str>) -> Result<Value>;
}

pub struct LiveFactCheckSource {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    page_size: u32,
}

impl LiveFactCheckSource {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(LiveFactCheckSource {
            client,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            page_size: 100,
        })
    }

    /// Reads `FACTCHECK_API_KEY`.
    pub fn from_env() -> Result<Self> {
        let key = std::env::var("FACTCHECK_API_KEY")
            .map_err(|_| Error::InvalidInput("FACTCHECK_API_KEY is not set".into()))?;
        Self::new(DEFAULT_ENDPOINT, key)
    }
}

impl FactCheckSource for LiveFactCheckSource {
    fn page(&self, publisher: Publisher, page_token: Option<&str>) -> Result<Value> {
        let mut query = vec![
            ("reviewPublisherSiteFilter", publisher.site().to_string()),
            ("pageSize", self.page_size.to_string()),
            ("key", self.api_key.clone()),
        ];
        if let Some(token) = page_token {
            query.push(("pageToken", token.to_string()));
        }
        let response = self
            .client
            .get(&self.endpoint)
            .query(&query)
            .send()
            .map_err(|e| Error::Transport(e.without_url().to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Error::Transport(format!("fact-check API returned {status}")));
        }
        if !status.is_success() {
            return Err(Error::InvalidInput(format!("fact-check API returned {status}")));
        }
        response
            .json()
            .map_err(|e| Error::Transport(format!("undecodable response: {e}")))
    }
}

/// Reads recorded responses from `{dir}/{publisher}.json`: a JSON array of
/// pages served in order, or a single page object.
pub struct FixtureFactCheckSource {
    dir: PathBuf,
}

impl FixtureFactCheckSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureFactCheckSource { dir: dir.into() }
    }

    fn pages(&self, publisher: Publisher) -> Result<Vec<Value>> {
        let path = self.dir.join(format!("{publisher}.json"));
        if !path.exists() {
            return Ok(Vec::new());
        }
        let value: Value = crate::jsonl::read_json(&path)?;
        Ok(match value {
            Value::Array(pages) => pages,
            page => vec![page],
        })
    }
}

impl FactCheckSource for FixtureFactCheckSource {
    fn page(&self, publisher: Publisher, page_token: Option<&str>) -> Result<Value> {
        let pages = self.pages(publisher)?;
        let index: usize = match page_token {
            None => 0,
            Some(t) => t
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad fixture page token {t:?}")))?,
        };
        let Some(page) = pages.get(index).cloned() else {
            return Ok(Value::Object(Default::default()));
        };
        let mut page = page;
        if index + 1 < pages.len() {
            if let Value::Object(map) = &mut page {
                map.insert("nextPageToken".into(), Value::String((index + 1).to_string()));
            }
        }
        Ok(page)
    }
}

fn fragment(v: &Value) -> String {
    let text = v.to_string();
    text.chars().take(200).collect()
}

fn host_matches(url: &str, site: &str) -> bool {
    url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_ascii_lowercase))
        .is_some_and(|h| h == site || h.ends_with(&format!(".{site}")))
}

fn parse_date(v: Option<&Value>) -> Option<NaiveDate> {
    let s = v?.as_str()?;
    let day = s.get(..10)?;
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

/// Entries on one response page plus the count of skipped malformed
/// reviews. Reviews from other sites are ignored silently.
pub fn parse_page(page: &Value, publisher: Publisher) -> (Vec<RawFactCheckEntry>, usize) {
    let mut entries = Vec::new();
    let mut skipped = 0;
    let claims = page.get("claims").and_then(Value::as_array);
    for claim in claims.into_iter().flatten() {
        let text = claim.get("text").and_then(Value::as_str).map(str::trim);
        let reviews = claim.get("claimReview").and_then(Value::as_array);
        let (Some(text), Some(reviews)) = (text.filter(|t| !t.is_empty()), reviews) else {
            skipped += 1;
            tracing::warn!(payload = %fragment(claim), "skipping malformed claim");
            continue;
        };
        for review in reviews {
            let url = review.get("url").and_then(Value::as_str).unwrap_or_default();
            let title = review.get("title").and_then(Value::as_str);
            let entry = match title {
                Some(title) if url::Url::parse(url).is_ok() => RawFactCheckEntry {
                    claim_text: text.to_string(),
                    claimant: claim.get("claimant").and_then(Value::as_str).map(str::to_string),
                    claim_date: parse_date(claim.get("claimDate")),
                    review_publisher: publisher,
                    review_url: url.to_string(),
                    review_title: title.trim().to_string(),
                    textual_verdict: review
                        .get("textualRating")
                        .and_then(Value::as_str)
                        .map(|v| v.trim().to_string())
                        .filter(|v| !v.is_empty()),
                    language_code: review
                        .get("languageCode")
                        .and_then(Value::as_str)
                        .unwrap_or("en")
                        .to_string(),
                },
                _ => {
                    skipped += 1;
                    tracing::warn!(payload = %fragment(review), "skipping malformed review");
                    continue;
                }
            };
            if host_matches(url, publisher.site()) {
                entries.push(entry);
            }
        }
    }
    (entries, skipped)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FetchOutcome {
    pub entries: Vec<RawFactCheckEntry>,
    pub skipped: usize,
    pub pages: usize,
}

const MAX_PAGES: usize = 10_000;

/// Pages through the source, keeping entries whose claim date falls in
/// `window`, deduplicated by (claim, url).
pub fn fetch_factcheck_entries(
    source: &dyn FactCheckSource,
    publisher: Publisher,
    window: DateWindow,
    retry: &RetryPolicy,
    sleeper: &dyn Sleeper,
) -> Result<FetchOutcome> {
    let mut out = FetchOutcome::default();
    let mut all = Vec::new();
    let mut token: Option<String> = None;
    loop {
        let page = retry.run(sleeper, |_| source.page(publisher, token.as_deref()))?;
        out.pages += 1;
        let (entries, skipped) = parse_page(&page, publisher);
        out.skipped += skipped;
        all.extend(entries.into_iter().filter(|e| window.contains(e.claim_date)));
        token = page
            .get("nextPageToken")
            .and_then(Value::as_str)
            .filter(|t| !t.is_empty())
            .map(str::to_string);
        if token.is_none() || out.pages >= MAX_PAGES {
            break;
        }
    }
    out.entries = dedup_entries(all);
    Ok(out)
}
