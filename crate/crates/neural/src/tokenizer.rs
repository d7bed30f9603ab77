//! Word-level tokenizer whose vocabulary is frozen into each checkpoint.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;
pub const NEWLINE: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "</s>", "<unk>", "<nl>"];

fn pieces() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\n|[\p{L}\p{N}]+(?:['’][\p{L}]+)?|[^\s\p{L}\p{N}]").expect("valid pattern")
    })
}

/// Splits text into word, number, punctuation and newline pieces.
pub fn split(text: &str) -> Vec<&str> {
    pieces().find_iter(text).map(|m| m.as_str()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tokenizer {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Tokenizer {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Tokenizer { tokens, index }
    }

    /// Builds a vocabulary from `texts`, most frequent pieces first; ties
    /// are broken lexicographically so the result is deterministic.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_size: usize, min_freq: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for piece in split(text) {
                if piece != "\n" {
                    *counts.entry(piece).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            ranked
                .into_iter()
                .take(max_size.saturating_sub(SPECIALS.len()))
                .map(|(t, _)| t.to_string()),
        );
        Self::from_tokens(tokens)
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        split(text)
            .into_iter()
            .map(|p| {
                if p == "\n" {
                    NEWLINE
                } else {
                    self.index.get(p).copied().unwrap_or(UNK)
                }
            })
            .collect()
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or("<unk>")
    }

    /// Joins pieces back into text, skipping pad/eos and attaching
    /// punctuation to the preceding word.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        let mut glue_next = true;
        for &id in ids {
            match id {
                PAD | EOS => continue,
                NEWLINE => {
                    out.push('\n');
                    glue_next = true;
                    continue;
                }
                _ => {}
            }
            let piece = self.token(id);
            let attaches_left = matches!(
                piece,
                "." | "," | ";" | ":" | "!" | "?" | ")" | "]" | "%" | "'" | "’"
            );
            if !glue_next && !attaches_left {
                out.push(' ');
            }
            out.push_str(piece);
            glue_next = matches!(piece, "(" | "[" | "£" | "$" | "€");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("serializable vocabulary");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Tokenizer = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad vocabulary file {}: {e}", path.display())))?;
        Ok(Self::from_tokens(raw.tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_words_numbers_and_punctuation() {
        assert_eq!(
            split("False. It's 3.8%\nyes"),
            ["False", ".", "It's", "3", ".", "8", "%", "\n", "yes"]
        );
    }

    #[test]
    fn round_trips_known_text() {
        let text = "summarize: Cash ban claim\nThe Treasury said there are no plans (none).";
        let tok = Tokenizer::build([text], 1000, 1);
        let ids = tok.encode(text);
        assert!(!ids.contains(&UNK));
        assert_eq!(
            tok.decode(&ids),
            "summarize: Cash ban claim\nThe Treasury said there are no plans (none)."
        );
    }

    #[test]
    fn unknown_pieces_map_to_unk() {
        let tok = Tokenizer::build(["alpha beta"], 100, 1);
        assert_eq!(tok.encode("alpha gamma"), [tok.encode("alpha")[0], UNK]);
    }

    #[test]
    fn vocabulary_is_deterministic() {
        let texts = ["b a c a", "c b a"];
        let a = Tokenizer::build(texts, 100, 1);
        let b = Tokenizer::build(texts, 100, 1);
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(&a.tokens[4..], ["a", "b", "c"]);
    }
}
