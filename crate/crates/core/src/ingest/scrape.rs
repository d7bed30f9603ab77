//! Article download and main-text extraction.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};

use super::retry::{RetryPolicy, Sleeper, ThreadSleeper};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Ok,
    HttpError,
    ParseError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrapedArticle {
    pub url: String,
    pub body_text: String,
    pub char_count: usize,
    pub fetch_status: FetchStatus,
}

impl ScrapedArticle {
    fn failed(url: &str, status: FetchStatus) -> Self {
        ScrapedArticle {
            url: url.to_string(),
            body_text: String::new(),
            char_count: 0,
            fetch_status: status,
        }
    }

    fn ok(url: &str, body_text: String) -> Self {
        ScrapedArticle {
            url: url.to_string(),
            char_count: body_text.chars().count(),
            body_text,
            fetch_status: FetchStatus::Ok,
        }
    }

    pub fn paragraphs(&self) -> impl Iterator<Item = &str> {
        self.body_text.split('\n').filter(|p| !p.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedPage {
    pub status: u16,
    pub body: String,
}

pub trait PageFetcher: Send + Sync {
    /// Transport failures are reported as [`Error::Transport`]; HTTP error
    /// statuses are returned as pages.
    fn get(&self, url: &str) -> Result<FetchedPage>;
}

pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .user_agent(concat!("factlens/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(HttpFetcher { client })
    }
}

impl PageFetcher for HttpFetcher {
    fn get(&self, url: &str) -> Result<FetchedPage> {
        let response = self
            .client
            .get(url)
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| Error::Transport(e.to_string()))?;
        Ok(FetchedPage { status, body })
    }
}

#[derive(Debug, Deserialize)]
struct FixturePage {
    url: String,
    #[serde(default = "ok_status")]
    status: u16,
    html: String,
}

fn ok_status() -> u16 {
    200
}

/// Recorded pages: JSONL lines `{url, status?, html}`. Unknown URLs are 404.
pub struct FixtureFetcher {
    pages: HashMap<String, FetchedPage>,
}

impl FixtureFetcher {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let lines: Vec<FixturePage> = crate::jsonl::read(path)?;
        let pages = lines
            .into_iter()
            .map(|p| {
                (
                    p.url,
                    FetchedPage {
                        status: p.status,
                        body: p.html,
                    },
                )
            })
            .collect();
        Ok(FixtureFetcher { pages })
    }
}

impl PageFetcher for FixtureFetcher {
    fn get(&self, url: &str) -> Result<FetchedPage> {
        Ok(self.pages.get(url).cloned().unwrap_or(FetchedPage {
            status: 404,
            body: String::new(),
        }))
    }
}

/// Scraper with a per-URL result cache.
pub struct Scraper {
    fetcher: Box<dyn PageFetcher>,
    retry: RetryPolicy,
    sleeper: Box<dyn Sleeper + Send + Sync>,
    cache: Mutex<HashMap<String, ScrapedArticle>>,
}

impl Scraper {
    pub fn new(fetcher: Box<dyn PageFetcher>) -> Self {
        Scraper {
            fetcher,
            retry: RetryPolicy::default(),
            sleeper: Box::new(ThreadSleeper),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy, sleeper: Box<dyn Sleeper + Send + Sync>) -> Self {
        self.retry = retry;
        self.sleeper = sleeper;
        self
    }

    pub fn scrape_article(&self, url: &str) -> Result<ScrapedArticle> {
        url::Url::parse(url).map_err(|e| Error::InvalidInput(format!("url {url:?}: {e}")))?;
        if let Some(hit) = self.cache.lock().expect("cache lock").get(url) {
            return Ok(hit.clone());
        }
        let article = match self.retry.run(self.sleeper.as_ref(), |_| self.fetcher.get(url)) {
            Err(Error::Transport(msg)) => {
                tracing::warn!(url, error = %msg, "article download failed");
                ScrapedArticle::failed(url, FetchStatus::HttpError)
            }
            Err(e) => return Err(e),
            Ok(page) if page.status >= 400 => {
                tracing::info!(url, status = page.status, "article returned an error status");
                ScrapedArticle::failed(url, FetchStatus::HttpError)
            }
            Ok(page) => match extract_main_text(&page.body) {
                Some(text) => ScrapedArticle::ok(url, text),
                None => ScrapedArticle::failed(url, FetchStatus::ParseError),
            },
        };
        self.cache
            .lock()
            .expect("cache lock")
            .insert(url.to_string(), article.clone());
        Ok(article)
    }
}

fn boilerplate_attr() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)comment|footer|sidebar|\bnav|menu|share|social|related|promo|cookie|advert|newsletter|subscribe|breadcrumb")
            .expect("valid pattern")
    })
}

const SKIPPED_TAGS: &[&str] = &[
    "script", "style", "noscript", "nav", "header", "footer", "aside", "form", "figure", "template",
];

fn is_boilerplate(el: ElementRef<'_>) -> bool {
    let v = el.value();
    if SKIPPED_TAGS.contains(&v.name()) {
        return true;
    }
    let marker = format!("{} {}", v.id().unwrap_or(""), v.attr("class").unwrap_or(""));
    !marker.trim().is_empty() && boilerplate_attr().is_match(&marker)
}

/// Collapses runs of whitespace into single spaces.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

struct Paragraph<'a> {
    el: ElementRef<'a>,
    text: String,
}

/// Readability-style extraction: paragraphs are grouped by parent
/// container, containers are scored by the text length of their
/// non-link-heavy paragraphs, and the best container's paragraphs are
/// returned one per line. `None` when no paragraph text is found.
pub fn extract_main_text(html: &str) -> Option<String> {
    let doc = Html::parse_document(html);
    let selector = Selector::parse("p").expect("valid selector");
    let link = Selector::parse("a").expect("valid selector");

    let mut paragraphs = Vec::new();
    for p in doc.select(&selector) {
        let skip =
            std::iter::successors(Some(p), |e| e.parent().and_then(ElementRef::wrap)).any(is_boilerplate);
        if skip {
            continue;
        }
        let text = normalize_whitespace(&p.text().collect::<String>());
        if text.is_empty() {
            continue;
        }
        let linked: usize = p
            .select(&link)
            .map(|a| {
                normalize_whitespace(&a.text().collect::<String>())
                    .chars()
                    .count()
            })
            .sum();
        if linked * 2 > text.chars().count() {
            continue;
        }
        paragraphs.push(Paragraph { el: p, text });
    }

    let mut scores: Vec<(ElementRef<'_>, usize)> = Vec::new();
    for para in &paragraphs {
        let Some(parent) = para.el.parent().and_then(ElementRef::wrap) else {
            continue;
        };
        let len = para.text.chars().count();
        match scores.iter_mut().find(|(el, _)| *el == parent) {
            Some((_, s)) => *s += len,
            None => scores.push((parent, len)),
        }
    }
    // first container in document order wins ties
    let (best, _) = scores
        .iter()
        .copied()
        .fold(None::<(ElementRef<'_>, usize)>, |acc, cur| match acc {
            Some(a) if a.1 >= cur.1 => Some(a),
            _ => Some(cur),
        })?;

    let kept: Vec<&str> = paragraphs
        .iter()
        .filter(|para| para.el.ancestors().any(|a| a.id() == best.id()))
        .map(|para| para.text.as_str())
        .collect();
    if kept.is_empty() {
        None
    } else {
        Some(kept.join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;

    const PAGE: &str = r#"<html><head><title>t</title><style>p{}</style></head><body>
        <nav><p>Home News Sport</p></nav>
        <div class="sidebar"><p>Most read stories today and yesterday</p></div>
        <article><h1>Headline</h1>
          <p>The   Treasury said there are
             no plans to ban cash.</p>
          <p>A consultation concerned <a href="/x">cash machines</a> in rural areas.</p>
          <p><a href="/a">Read more about this</a></p>
        </article>
        <footer><p>Copyright</p></footer></body></html>"#;

    #[test]
    fn extracts_main_paragraphs() {
        assert_eq!(
            extract_main_text(PAGE).unwrap(),
            "The Treasury said there are no plans to ban cash.\nA consultation concerned cash machines in rural areas."
        );
    }

    #[test]
    fn no_paragraphs_means_none() {
        assert_eq!(
            extract_main_text("<html><body><div>just a div</div></body></html>"),
            None
        );
        assert_eq!(extract_main_text("\u{0}\u{1}not html at all"), None);
    }

    struct Fixed(u16, &'static str, Arc<AtomicUsize>);

    impl Fixed {
        fn boxed(status: u16, body: &'static str) -> (Box<Self>, Arc<AtomicUsize>) {
            let calls = Arc::new(AtomicUsize::new(0));
            (Box::new(Fixed(status, body, calls.clone())), calls)
        }
    }

    impl PageFetcher for Fixed {
        fn get(&self, _: &str) -> Result<FetchedPage> {
            self.2.fetch_add(1, Ordering::SeqCst);
            Ok(FetchedPage {
                status: self.0,
                body: self.1.to_string(),
            })
        }
    }

    #[test]
    fn statuses_and_cache() {
        let (fetcher, calls) = Fixed::boxed(200, PAGE);
        let ok = Scraper::new(fetcher);
        let a = ok.scrape_article("https://fullfact.org/a").unwrap();
        assert_eq!(a.fetch_status, FetchStatus::Ok);
        assert_eq!(a.char_count, a.body_text.chars().count());
        assert_eq!(ok.scrape_article("https://fullfact.org/a").unwrap(), a);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(ok.scrape_article("not a url").is_err());

        let missing = Scraper::new(Fixed::boxed(404, PAGE).0);
        let m = missing.scrape_article("https://fullfact.org/gone").unwrap();
        assert_eq!((m.fetch_status, m.char_count), (FetchStatus::HttpError, 0));

        let bad = Scraper::new(Fixed::boxed(200, "<html></html>").0);
        assert_eq!(
            bad.scrape_article("https://fullfact.org/b").unwrap().fetch_status,
            FetchStatus::ParseError
        );
    }
}
