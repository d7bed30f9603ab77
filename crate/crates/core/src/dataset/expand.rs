use std::collections::{HashMap, HashSet};

use super::record::{EvidenceBundle, EvidenceKind, ExpansionStrategy};
use crate::error::{Error, Result};
use crate::ingest::scrape::{normalize_whitespace, FetchStatus, ScrapedArticle};
use crate::ingest::snippets::SearchSnippetSet;
use crate::rouge::tokenize;

/// Jaccard similarity of lowercased, punctuation-stripped token sets.
/// Two empty sets score 0.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a: HashSet<String> = tokenize(a).into_iter().collect();
    let b: HashSet<String> = tokenize(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Search engines mark truncated snippets with ellipses; those are not part
/// of the page text.
fn snippet_core(snippet: &str) -> String {
    let s = normalize_whitespace(snippet);
    s.trim_matches(|c: char| c == '…' || c == '.' || c.is_whitespace())
        .to_string()
}

fn matching_paragraph<'a>(
    snippet: &str,
    page: &'a ScrapedArticle,
    strategy: ExpansionStrategy,
    threshold: f64,
) -> Option<&'a str> {
    match strategy {
        ExpansionStrategy::None => None,
        ExpansionStrategy::ExactMatch => {
            let core = snippet_core(snippet);
            if core.is_empty() {
                return None;
            }
            page.paragraphs().find(|p| p.contains(core.as_str()))
        }
        ExpansionStrategy::LexicalSim => {
            let mut best: Option<(&str, f64)> = None;
            for p in page.paragraphs() {
                let score = jaccard(snippet, p);
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((p, score));
                }
            }
            best.filter(|(_, s)| *s >= threshold).map(|(p, _)| p)
        }
    }
}

/// Appends to each snippet the first paragraph of its source page that
/// contains it (exact match) or the most similar paragraph when its Jaccard
/// score reaches `threshold` (lexical similarity). Snippets without a page
/// or a match pass through unchanged.
pub fn expand_snippets(
    set: &SearchSnippetSet,
    pages: &HashMap<String, ScrapedArticle>,
    strategy: ExpansionStrategy,
    threshold: Option<f64>,
) -> Result<EvidenceBundle> {
    let threshold = match (strategy, threshold) {
        (ExpansionStrategy::LexicalSim, Some(t)) if (0.0..=1.0).contains(&t) => t,
        (ExpansionStrategy::LexicalSim, t) => {
            return Err(Error::InvalidInput(format!(
                "lexical-similarity expansion needs a threshold in [0, 1], got {t:?}"
            )))
        }
        _ => 0.0,
    };
    let snippets = set
        .snippets
        .iter()
        .map(|s| {
            let page = pages
                .get(&s.source_url)
                .filter(|p| p.fetch_status == FetchStatus::Ok);
            match page.and_then(|p| matching_paragraph(&s.snippet_text, p, strategy, threshold)) {
                Some(paragraph) => format!("{} {}", s.snippet_text, paragraph),
                None => s.snippet_text.clone(),
            }
        })
        .collect();
    Ok(EvidenceBundle {
        kind: EvidenceKind::SnippetsExpanded,
        article_text: None,
        snippets: Some(snippets),
        expansion_strategy: Some(strategy),
        ls_threshold: (strategy == ExpansionStrategy::LexicalSim).then_some(threshold),
    })
}

/// Number of snippets changed by expansion.
pub fn expanded_count(original: &SearchSnippetSet, expanded: &EvidenceBundle) -> usize {
    original
        .snippets
        .iter()
        .zip(expanded.snippets.as_deref().unwrap_or_default())
        .filter(|(a, b)| a.snippet_text != **b)
        .count()
}
