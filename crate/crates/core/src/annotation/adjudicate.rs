//! Tie-break adjudication on objective dimensions through an external
//! text-completion client.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::judgment::{Dimension, SummaryContext};
use crate::error::{Error, Result};

pub const PROMPT_TEMPLATE: &str = include_str!("../../data/adjudicator_prompt.txt");

pub fn question(dim: Dimension) -> &'static str {
    match dim {
        Dimension::ArticleContradiction => {
            "Does the explanation state anything that contradicts the article?"
        }
        Dimension::SelfContradiction => "Does the explanation contradict itself?",
        Dimension::Hallucination => {
            "Does the explanation contain information that is not present in the article?"
        }
        Dimension::Convincingness => "Is the explanation convincing?",
        Dimension::Quality => "How good is the explanation overall?",
    }
}

pub fn render_prompt(ctx: &SummaryContext, dim: Dimension) -> String {
    PROMPT_TEMPLATE
        .replace("{claim}", &ctx.claim)
        .replace("{verdict}", &ctx.verdict)
        .replace("{article}", &ctx.article)
        .replace("{explanation}", &ctx.explanation)
        .replace("{question}", question(dim))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjudicationRequest {
    pub summary_id: String,
    pub dimension: Dimension,
    pub prompt: String,
}

pub trait Adjudicator {
    /// Raw completion text for the request.
    fn complete(&self, request: &AdjudicationRequest) -> Result<String>;
}

/// Reads a yes/no answer from the first word of a completion.
pub fn parse_answer(text: &str) -> Result<bool> {
    let first = text
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| !w.is_empty())
        .unwrap_or("")
        .to_lowercase();
    match first.as_str() {
        "yes" | "true" => Ok(true),
        "no" | "false" => Ok(false),
        _ => Err(Error::Adjudicator(format!("unparseable answer {text:?}"))),
    }
}

/// One adjudication attempt as written to the append-only log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationRecord {
    pub summary_id: String,
    pub dimension: Dimension,
    pub prompt_sha256: String,
    pub response: Option<String>,
    /// `None` when the tie stays unresolved.
    pub outcome: Option<bool>,
    pub error: Option<String>,
}

/// Asks the adjudicator about one tied objective dimension.
pub fn adjudicate_tie(
    adjudicator: &dyn Adjudicator,
    ctx: &SummaryContext,
    dim: Dimension,
) -> Result<AdjudicationRecord> {
    if !dim.is_objective() {
        return Err(Error::InvalidInput(format!(
            "{dim} is subjective and cannot be adjudicated"
        )));
    }
    let prompt = render_prompt(ctx, dim);
    let prompt_sha256 = hex::encode(Sha256::digest(prompt.as_bytes()));
    let request = AdjudicationRequest {
        summary_id: ctx.summary_id.clone(),
        dimension: dim,
        prompt,
    };
    let mut record = AdjudicationRecord {
        summary_id: ctx.summary_id.clone(),
        dimension: dim,
        prompt_sha256,
        response: None,
        outcome: None,
        error: None,
    };
    match adjudicator.complete(&request) {
        Ok(text) => {
            match parse_answer(&text) {
                Ok(b) => record.outcome = Some(b),
                Err(e) => record.error = Some(e.to_string()),
            }
            record.response = Some(text);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    if let Some(err) = &record.error {
        tracing::warn!(summary = %ctx.summary_id, dimension = %dim, %err, "tie left unresolved");
    }
    Ok(record)
}

/// Adjudicates every tie, appending each attempt to `log` when given.
pub fn adjudicate_ties(
    adjudicator: &dyn Adjudicator,
    ties: &[(String, Dimension)],
    summaries: &HashMap<String, SummaryContext>,
    log: Option<&Path>,
) -> Result<Vec<AdjudicationRecord>> {
    let mut out = Vec::with_capacity(ties.len());
    for (summary_id, dim) in ties {
        let record = match summaries.get(summary_id) {
            Some(ctx) => adjudicate_tie(adjudicator, ctx, *dim)?,
            None => AdjudicationRecord {
                summary_id: summary_id.clone(),
                dimension: *dim,
                prompt_sha256: String::new(),
                response: None,
                outcome: None,
                error: Some("summary context missing".into()),
            },
        };
        if let Some(path) = log {
            crate::jsonl::append(path, [&record])?;
        }
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct FixtureLine {
    summary_id: String,
    dimension: Dimension,
    response: String,
}

/// Recorded completions keyed by summary and dimension. JSONL lines
/// `{summary_id, dimension, response}`.
#[derive(Debug, Default)]
pub struct FixtureAdjudicator {
    responses: HashMap<(String, Dimension), String>,
}

impl FixtureAdjudicator {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let lines: Vec<FixtureLine> = crate::jsonl::read(path)?;
        Ok(FixtureAdjudicator {
            responses: lines
                .into_iter()
                .map(|l| ((l.summary_id, l.dimension), l.response))
                .collect(),
        })
    }

    pub fn insert(&mut self, summary_id: &str, dim: Dimension, response: &str) {
        self.responses
            .insert((summary_id.to_string(), dim), response.to_string());
    }
}

impl Adjudicator for FixtureAdjudicator {
    fn complete(&self, request: &AdjudicationRequest) -> Result<String> {
        self.responses
            .get(&(request.summary_id.clone(), request.dimension))
            .cloned()
            .ok_or_else(|| {
                Error::Adjudicator(format!(
                    "no recorded response for {}/{}",
                    request.summary_id, request.dimension
                ))
            })
    }
}

pub const DEFAULT_CHAT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_CHAT_MODEL: &str = "gpt-3.5-turbo";

/// Client for an OpenAI-compatible chat completion endpoint, temperature 0.
pub struct LiveAdjudicator {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
}

impl LiveAdjudicator {
    pub fn new(endpoint: &str, model: &str, api_key: &str) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(LiveAdjudicator {
            client,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: api_key.to_string(),
        })
    }
}

impl Adjudicator for LiveAdjudicator {
    fn complete(&self, request: &AdjudicationRequest) -> Result<String> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| Error::Transport(e.without_url().to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Transport(format!("adjudicator returned {status}")));
        }
        let value: Value = response
            .json()
            .map_err(|e| Error::Adjudicator(format!("undecodable response: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Adjudicator("response has no message content".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdjudicatorBackend {
    Live,
    Fixture(PathBuf),
}

impl std::str::FromStr for AdjudicatorBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "live" => Ok(AdjudicatorBackend::Live),
            other => match other.strip_prefix("fixture:") {
                Some(p) if !p.is_empty() => Ok(AdjudicatorBackend::Fixture(PathBuf::from(p))),
                _ => Err(Error::InvalidInput(format!(
                    "unknown adjudicator backend {other:?}"
                ))),
            },
        }
    }
}

impl AdjudicatorBackend {
    /// Builds the client. The live backend reads `ADJUDICATOR_API_KEY` and
    /// optionally `ADJUDICATOR_ENDPOINT` and `ADJUDICATOR_MODEL`.
    pub fn build(&self) -> Result<Box<dyn Adjudicator>> {
        match self {
            AdjudicatorBackend::Fixture(p) => Ok(Box::new(FixtureAdjudicator::load(p)?)),
            AdjudicatorBackend::Live => {
                let key = std::env::var("ADJUDICATOR_API_KEY")
                    .map_err(|_| Error::InvalidInput("ADJUDICATOR_API_KEY is not set".into()))?;
                let endpoint = std::env::var("ADJUDICATOR_ENDPOINT")
                    .unwrap_or_else(|_| DEFAULT_CHAT_ENDPOINT.to_string());
                let model =
                    std::env::var("ADJUDICATOR_MODEL").unwrap_or_else(|_| DEFAULT_CHAT_MODEL.to_string());
                Ok(Box::new(LiveAdjudicator::new(&endpoint, &model, &key)?))
            }
        }
    }

    /// Reads `ADJUDICATOR_BACKEND`; `None` when unset.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var("ADJUDICATOR_BACKEND") {
            Ok(v) => v.parse().map(Some),
            Err(_) => Ok(None),
        }
    }
}
