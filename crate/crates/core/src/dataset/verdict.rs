//! Mapping of free-form verdict strings onto seven nominal categories.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NominalVerdict {
    True,
    Almost,
    Half,
    Hardly,
    False,
    Misleading,
    Satire,
}

impl NominalVerdict {
    pub const ALL: [NominalVerdict; 7] = [
        NominalVerdict::True,
        NominalVerdict::Almost,
        NominalVerdict::Half,
        NominalVerdict::Hardly,
        NominalVerdict::False,
        NominalVerdict::Misleading,
        NominalVerdict::Satire,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NominalVerdict::True => "TRUE",
            NominalVerdict::Almost => "ALMOST",
            NominalVerdict::Half => "HALF",
            NominalVerdict::Hardly => "HARDLY",
            NominalVerdict::False => "FALSE",
            NominalVerdict::Misleading => "MISLEADING",
            NominalVerdict::Satire => "SATIRE",
        }
    }
}

impl fmt::Display for NominalVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NominalVerdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NominalVerdict::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown verdict category {s:?}")))
    }
}

/// Pattern table applied case-insensitively by substring containment.
/// Longer patterns are tried first and the first hit wins.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictMapping {
    rules: Vec<(String, NominalVerdict)>,
    default: NominalVerdict,
}

/// Reconstructed default table, shipped with the crate.
pub const DEFAULT_MAPPING_TSV: &str = include_str!("../../data/verdict_mapping.tsv");

impl VerdictMapping {
    pub fn new(rules: Vec<(String, NominalVerdict)>, default: NominalVerdict) -> Self {
        let mut rules: Vec<(String, NominalVerdict)> =
            rules.into_iter().map(|(p, c)| (p.to_lowercase(), c)).collect();
        // stable sort keeps file order among equal-length patterns
        rules.sort_by_key(|r| std::cmp::Reverse(r.0.chars().count()));
        VerdictMapping { rules, default }
    }

    /// Parses `pattern<TAB>CATEGORY` lines. `#` starts a comment and a
    /// `#default<TAB>CATEGORY` line sets the fallback (FALSE otherwise).
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        let mut default = NominalVerdict::False;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let pattern = parts.next().unwrap_or_default();
            let category = parts.next().map(str::trim);
            if pattern == "#default" {
                let cat = category.ok_or_else(|| {
                    Error::InvalidInput(format!("line {}: #default without a category", idx + 1))
                })?;
                default = cat.parse()?;
                continue;
            }
            if pattern.starts_with('#') {
                continue;
            }
            let category = category.ok_or_else(|| {
                Error::InvalidInput(format!("line {}: expected pattern<TAB>category", idx + 1))
            })?;
            if pattern.trim().is_empty() {
                return Err(Error::InvalidInput(format!("line {}: empty pattern", idx + 1)));
            }
            rules.push((pattern.trim().to_string(), category.parse()?));
        }
        Ok(Self::new(rules, default))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }

    pub fn shipped() -> Self {
        Self::from_tsv(DEFAULT_MAPPING_TSV).expect("shipped mapping parses")
    }

    pub fn default_category(&self) -> NominalVerdict {
        self.default
    }

    /// Category for `verdict`, or `None` when no pattern matches.
    pub fn lookup(&self, verdict: &str) -> Option<NominalVerdict> {
        let lowered = verdict.to_lowercase();
        self.rules
            .iter()
            .find(|(pattern, _)| lowered.contains(pattern.as_str()))
            .map(|(_, c)| *c)
    }

    /// Total mapping: unmatched verdicts fall back to the default and are
    /// logged.
    pub fn normalize(&self, verdict: &str) -> NominalVerdict {
        self.lookup(verdict).unwrap_or_else(|| {
            tracing::info!(verdict, default = %self.default, "verdict matched no pattern");
            self.default
        })
    }
}

pub fn normalize_verdict(verdict: &str, mapping: &VerdictMapping) -> NominalVerdict {
    mapping.normalize(verdict)
}
