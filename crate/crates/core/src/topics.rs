//! Bag-of-words vectorizer and latent Dirichlet allocation fitted with
//! online variational Bayes (mini-batch updates with a decaying step size).

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use regex::Regex;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};

fn token_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\w\w+\b").expect("valid pattern"))
}

pub fn analyze(doc: &str) -> Vec<String> {
    let lower = doc.to_lowercase();
    token_pattern()
        .find_iter(&lower)
        .map(|m| m.as_str().to_string())
        .collect()
}

/// Sparse document-term counts over a sorted vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    pub vocabulary: Vec<String>,
    /// Per document: `(term index, count)` sorted by index.
    pub rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerConfig {
    pub max_features: usize,
    /// Terms in more than `max_df * n_docs` documents are removed.
    pub max_df: f64,
    /// Terms in fewer than `min_df` documents are removed.
    pub min_df: usize,
    #[serde(default)]
    pub stop_words: Vec<String>,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            max_features: 500,
            max_df: 0.5,
            min_df: 10,
            stop_words: Vec::new(),
        }
    }
}

pub fn count_vectorize(docs: &[String], config: &VectorizerConfig) -> Result<CountMatrix> {
    let stop: std::collections::HashSet<&str> = config.stop_words.iter().map(String::as_str).collect();
    let tokenized: Vec<Vec<String>> = docs
        .iter()
        .map(|d| {
            analyze(d)
                .into_iter()
                .filter(|t| !stop.contains(t.as_str()))
                .collect()
        })
        .collect();
    let mut df: HashMap<&str, usize> = HashMap::new();
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for doc in &tokenized {
        let mut seen = std::collections::HashSet::new();
        for t in doc {
            *tf.entry(t).or_insert(0) += 1;
            if seen.insert(t.as_str()) {
                *df.entry(t).or_insert(0) += 1;
            }
        }
    }
    let max_count = config.max_df * docs.len() as f64;
    let mut kept: Vec<(&str, usize)> = df
        .iter()
        .filter(|(_, &d)| d as f64 <= max_count && d >= config.min_df)
        .map(|(&t, _)| (t, tf[t]))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    kept.truncate(config.max_features);
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_df: config.min_df,
            max_df: config.max_df,
            max_features: config.max_features,
        });
    }
    let mut vocabulary: Vec<String> = kept.into_iter().map(|(t, _)| t.to_string()).collect();
    vocabulary.sort();
    let index: HashMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let rows = tokenized
        .iter()
        .map(|doc| {
            let mut counts: HashMap<usize, f64> = HashMap::new();
            for t in doc {
                if let Some(&i) = index.get(t.as_str()) {
                    *counts.entry(i).or_insert(0.0) += 1.0;
                }
            }
            let mut row: Vec<(usize, f64)> = counts.into_iter().collect();
            row.sort_by_key(|(i, _)| *i);
            row
        })
        .collect();
    Ok(CountMatrix { vocabulary, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub n_topics: usize,
    pub max_iter: usize,
    pub batch_size: usize,
    pub learning_decay: f64,
    pub learning_offset: f64,
    /// Defaults to `1 / n_topics` when unset.
    pub doc_topic_prior: Option<f64>,
    pub topic_word_prior: Option<f64>,
    pub max_doc_update_iter: usize,
    pub mean_change_tol: f64,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            n_topics: 10,
            max_iter: 10,
            batch_size: 128,
            learning_decay: 0.7,
            learning_offset: 10.0,
            doc_topic_prior: None,
            topic_word_prior: None,
            max_doc_update_iter: 100,
            mean_change_tol: 1e-3,
            seed: 0,
        }
    }
}

const EPS: f64 = f64::EPSILON;

fn exp_dirichlet_expectation(row: &[f64]) -> Vec<f64> {
    let total = digamma(row.iter().sum());
    row.iter().map(|&x| (digamma(x) - total).exp()).collect()
}

/// Fitted topic-word pseudo-counts, `k x V`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub components: Vec<Vec<f64>>,
    pub vocabulary: Vec<String>,
}

impl LdaModel {
    /// Topic-word distributions (rows normalized to sum to one).
    pub fn distributions(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.iter().map(|x| x / s).collect()
            })
            .collect()
    }

    pub fn top_terms(&self, n: usize) -> Vec<Vec<(String, f64)>> {
        self.distributions()
            .into_iter()
            .map(|row| {
                let mut idx: Vec<usize> = (0..row.len()).collect();
                idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                idx.into_iter()
                    .take(n)
                    .map(|i| (self.vocabulary[i].clone(), row[i]))
                    .collect()
            })
            .collect()
    }
}

pub fn fit_lda(counts: &CountMatrix, config: &LdaConfig) -> Result<LdaModel> {
    let k = config.n_topics;
    let v = counts.vocabulary.len();
    let n_docs = counts.rows.len();
    if k == 0 || n_docs == 0 || v == 0 {
        return Err(Error::InvalidInput(format!(
            "LDA needs topics, documents and terms (k={k}, docs={n_docs}, terms={v})"
        )));
    }
    let alpha = config.doc_topic_prior.unwrap_or(1.0 / k as f64);
    let eta = config.topic_word_prior.unwrap_or(1.0 / k as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Gamma::new(100.0, 0.01).expect("valid gamma");
    let mut lambda: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..v).map(|_| init.sample(&mut rng)).collect())
        .collect();
    let batch = config.batch_size.max(1);
    let mut n_batch_iter = 1usize;

    for _ in 0..config.max_iter {
        for start in (0..n_docs).step_by(batch) {
            let docs = &counts.rows[start..(start + batch).min(n_docs)];
            let exp_topic_word: Vec<Vec<f64>> =
                lambda.iter().map(|row| exp_dirichlet_expectation(row)).collect();
            let mut sstats = vec![vec![0.0; v]; k];
            for doc in docs {
                if doc.is_empty() {
                    continue;
                }
                let mut gamma: Vec<f64> = (0..k).map(|_| init.sample(&mut rng)).collect();
                let mut exp_theta = exp_dirichlet_expectation(&gamma);
                let mut norm_phi = vec![0.0; doc.len()];
                for _ in 0..config.max_doc_update_iter {
                    for (j, &(w, _)) in doc.iter().enumerate() {
                        norm_phi[j] = (0..k).map(|t| exp_theta[t] * exp_topic_word[t][w]).sum::<f64>() + EPS;
                    }
                    let last = gamma.clone();
                    for t in 0..k {
                        let dot: f64 = doc
                            .iter()
                            .enumerate()
                            .map(|(j, &(w, c))| c / norm_phi[j] * exp_topic_word[t][w])
                            .sum();
                        gamma[t] = exp_theta[t] * dot + alpha;
                    }
                    exp_theta = exp_dirichlet_expectation(&gamma);
                    let change = gamma.iter().zip(&last).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64;
                    if change < config.mean_change_tol {
                        break;
                    }
                }
                for (j, &(w, _)) in doc.iter().enumerate() {
                    norm_phi[j] = (0..k).map(|t| exp_theta[t] * exp_topic_word[t][w]).sum::<f64>() + EPS;
                }
                for t in 0..k {
                    for (j, &(w, c)) in doc.iter().enumerate() {
                        sstats[t][w] += exp_theta[t] * c / norm_phi[j];
                    }
                }
            }
            let rho = (config.learning_offset + n_batch_iter as f64).powf(-config.learning_decay);
            let doc_ratio = n_docs as f64 / docs.len() as f64;
            for t in 0..k {
                for w in 0..v {
                    let ss = sstats[t][w] * exp_topic_word[t][w];
                    lambda[t][w] = (1.0 - rho) * lambda[t][w] + rho * (eta + doc_ratio * ss);
                }
            }
            n_batch_iter += 1;
        }
    }
    Ok(LdaModel {
        components: lambda,
        vocabulary: counts.vocabulary.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub index: usize,
    pub terms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTable {
    pub topics: Vec<Topic>,
    pub vocabulary_size: usize,
    pub documents: usize,
}

/// Vectorizes `claims`, fits LDA and reports the top `n_terms` per topic.
pub fn fit_topic_model(
    claims: &[String],
    vectorizer: &VectorizerConfig,
    lda: &LdaConfig,
    n_terms: usize,
) -> Result<(TopicTable, LdaModel)> {
    if claims.is_empty() {
        return Err(Error::InvalidInput("topic model needs at least one claim".into()));
    }
    let counts = count_vectorize(claims, vectorizer)?;
    let model = fit_lda(&counts, lda)?;
    let topics = model
        .top_terms(n_terms)
        .into_iter()
        .enumerate()
        .map(|(index, terms)| Topic { index, terms })
        .collect();
    Ok((
        TopicTable {
            topics,
            vocabulary_size: counts.vocabulary.len(),
            documents: claims.len(),
        },
        model,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyzer_drops_single_characters() {
        assert_eq!(
            analyze("A 5G mast, I said: COVID-19!"),
            ["5g", "mast", "said", "covid", "19"]
        );
    }

    #[test]
    fn df_bounds() {
        let docs: Vec<String> = ["apple pie", "apple tart", "apple crumble", "pear tart"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cfg = VectorizerConfig {
            max_features: 10,
            max_df: 0.5,
            min_df: 2,
            stop_words: vec![],
        };
        // apple appears in 3 of 4 documents (> 2), tart in exactly 2
        let m = count_vectorize(&docs, &cfg).unwrap();
        assert_eq!(m.vocabulary, ["tart"]);
    }

    #[test]
    fn empty_vocabulary_names_bounds() {
        let docs = vec!["one two".to_string()];
        let err = count_vectorize(&docs, &VectorizerConfig::default()).unwrap_err();
        assert!(err.to_string().contains("min_df=10"));
    }

    #[test]
    fn max_features_keeps_most_frequent() {
        let docs: Vec<String> = (0..4)
            .map(|i| if i < 2 { "aa aa bb".into() } else { "cc dd".into() })
            .collect();
        let cfg = VectorizerConfig {
            max_features: 1,
            max_df: 1.0,
            min_df: 1,
            stop_words: vec![],
        };
        assert_eq!(count_vectorize(&docs, &cfg).unwrap().vocabulary, ["aa"]);
    }
}
