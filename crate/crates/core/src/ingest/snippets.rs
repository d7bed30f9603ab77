//! Search-engine snippets used as alternative evidence.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::retry::{RetryPolicy, Sleeper};
use crate::error::{Error, Result};

pub const MAX_SNIPPETS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub rank: u32,
    pub snippet_text: String,
    pub source_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSnippetSet {
    pub claim_text: String,
    pub snippets: Vec<Snippet>,
    pub excluded_domain: String,
}

impl SearchSnippetSet {
    pub fn texts(&self) -> Vec<String> {
        self.snippets.iter().map(|s| s.snippet_text.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.snippets.len() > MAX_SNIPPETS {
            return Err(Error::InvalidInput(format!(
                "{} snippets exceed the limit of {MAX_SNIPPETS}",
                self.snippets.len()
            )));
        }
        if self.snippets.windows(2).any(|w| w[0].rank >= w[1].rank) {
            return Err(Error::InvalidInput(
                "snippet ranks are not strictly ascending".into(),
            ));
        }
        if self
            .snippets
            .iter()
            .any(|s| host_in_domain(&s.source_url, &self.excluded_domain))
        {
            return Err(Error::InvalidInput(format!(
                "snippet set contains the excluded domain {}",
                self.excluded_domain
            )));
        }
        Ok(())
    }
}

/// One backend hit; `rank` starts at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub rank: u32,
    pub snippet: String,
    pub url: String,
}

pub trait SearchBackend {
    /// Hits in backend ranking order.
    fn search(&self, query: &str) -> Result<Vec<SearchHit>>;
}

/// `true` when the URL's host is `domain` or one of its subdomains.
pub fn host_in_domain(url: &str, domain: &str) -> bool {
    let domain = domain.trim().trim_start_matches("www.").to_ascii_lowercase();
    if domain.is_empty() {
        return false;
    }
    let Some(host) = url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_ascii_lowercase))
    else {
        return false;
    };
    host == domain || host.ends_with(&format!(".{domain}"))
}

/// Top hits for `claim` with the excluded domain removed. Backend order and
/// ranks are kept, so ranks may have gaps where hits were removed.
pub fn fetch_snippets(
    backend: &dyn SearchBackend,
    claim: &str,
    excluded_domain: &str,
    retry: &RetryPolicy,
    sleeper: &dyn Sleeper,
) -> Result<SearchSnippetSet> {
    let mut hits = retry.run(sleeper, |_| backend.search(claim))?;
    hits.sort_by_key(|h| h.rank);
    hits.dedup_by_key(|h| h.rank);
    let snippets = hits
        .into_iter()
        .take(MAX_SNIPPETS)
        .filter(|h| !host_in_domain(&h.url, excluded_domain))
        .map(|h| Snippet {
            rank: h.rank,
            snippet_text: h.snippet,
            source_url: h.url,
        })
        .collect();
    Ok(SearchSnippetSet {
        claim_text: claim.to_string(),
        snippets,
        excluded_domain: excluded_domain.to_string(),
    })
}

#[derive(Debug, Deserialize)]
struct FixtureLine {
    claim: String,
    hits: Vec<FixtureHit>,
}

#[derive(Debug, Deserialize)]
struct FixtureHit {
    snippet: String,
    url: String,
}

/// Recorded results: JSONL lines `{claim, hits: [{snippet, url}]}`, hits in
/// ranking order. Unknown claims return no hits.
pub struct FixtureSearchBackend {
    results: HashMap<String, Vec<SearchHit>>,
}

impl FixtureSearchBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let lines: Vec<FixtureLine> = crate::jsonl::read(path)?;
        let results = lines
            .into_iter()
            .map(|l| {
                let hits = l
                    .hits
                    .into_iter()
                    .enumerate()
                    .map(|(i, h)| SearchHit {
                        rank: i as u32 + 1,
                        snippet: h.snippet,
                        url: h.url,
                    })
                    .collect();
                (l.claim, hits)
            })
            .collect();
        Ok(FixtureSearchBackend { results })
    }
}

impl SearchBackend for FixtureSearchBackend {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>> {
        Ok(self.results.get(query).cloned().unwrap_or_default())
    }
}

pub const SERP_ENDPOINT: &str = "https://serpapi.com/search.json";

/// Client for a SerpAPI-style JSON search endpoint.
pub struct LiveSearchBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

impl LiveSearchBackend {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(LiveSearchBackend {
            client,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
        })
    }

    /// Reads `SEARCH_API_KEY`.
    pub fn from_env() -> Result<Self> {
        let key = std::env::var("SEARCH_API_KEY")
            .map_err(|_| Error::InvalidInput("SEARCH_API_KEY is not set".into()))?;
        Self::new(SERP_ENDPOINT, key)
    }
}

impl SearchBackend for LiveSearchBackend {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>> {
        let response = self
            .client
            .get(&self.endpoint)
            .query(&[
                ("q", query),
                ("num", "10"),
                ("engine", "google"),
                ("api_key", self.api_key.as_str()),
            ])
            .send()
            .map_err(|e| Error::Transport(e.without_url().to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Transport(format!("search backend returned {status}")));
        }
        let body: Value = response
            .json()
            .map_err(|e| Error::Transport(format!("undecodable search response: {e}")))?;
        let results = body.get("organic_results").and_then(Value::as_array);
        Ok(results
            .into_iter()
            .flatten()
            .enumerate()
            .filter_map(|(i, r)| {
                Some(SearchHit {
                    rank: r
                        .get("position")
                        .and_then(Value::as_u64)
                        .map_or(i as u32 + 1, |p| p as u32),
                    snippet: r.get("snippet")?.as_str()?.to_string(),
                    url: r.get("link")?.as_str()?.to_string(),
                })
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::retry::RecordingSleeper;

    struct Hits(Vec<SearchHit>);

    impl SearchBackend for Hits {
        fn search(&self, _: &str) -> Result<Vec<SearchHit>> {
            Ok(self.0.clone())
        }
    }

    fn hits(urls: &[&str]) -> Hits {
        Hits(
            urls.iter()
                .enumerate()
                .map(|(i, u)| SearchHit {
                    rank: i as u32 + 1,
                    snippet: format!("snippet {i}"),
                    url: u.to_string(),
                })
                .collect(),
        )
    }

    #[test]
    fn excluded_domain_is_filtered() {
        let mut urls = vec!["https://www.bbc.co.uk/news/1"; 10];
        urls[3] = "https://fullfact.org/health/x/";
        let set = fetch_snippets(
            &hits(&urls),
            "claim",
            "fullfact.org",
            &RetryPolicy::default(),
            &RecordingSleeper::default(),
        )
        .unwrap();
        assert_eq!(set.snippets.len(), 9);
        assert!(set.snippets.iter().all(|s| s.rank != 4));
        set.validate().unwrap();
    }

    #[test]
    fn at_most_ten_and_subdomains_excluded() {
        let urls: Vec<String> = (0..15).map(|i| format!("https://site{i}.org/")).collect();
        let mut refs: Vec<&str> = urls.iter().map(String::as_str).collect();
        refs[0] = "https://blog.fullfact.org/a";
        let set = fetch_snippets(
            &hits(&refs),
            "claim",
            "fullfact.org",
            &RetryPolicy::default(),
            &RecordingSleeper::default(),
        )
        .unwrap();
        assert_eq!(set.snippets.len(), 9);
        assert_eq!(set.snippets[0].rank, 2);
    }

    #[test]
    fn domain_matching_is_by_host() {
        assert!(host_in_domain("https://FullFact.org/x", "fullfact.org"));
        assert!(host_in_domain("https://www.fullfact.org/x", "fullfact.org"));
        assert!(!host_in_domain("https://notfullfact.org/x", "fullfact.org"));
        assert!(!host_in_domain(
            "https://example.com/fullfact.org",
            "fullfact.org"
        ));
    }

    #[test]
    fn no_hits_is_empty() {
        let set = fetch_snippets(
            &hits(&[]),
            "claim",
            "fullfact.org",
            &RetryPolicy::default(),
            &RecordingSleeper::default(),
        )
        .unwrap();
        assert!(set.snippets.is_empty());
    }
}
