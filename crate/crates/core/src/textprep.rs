//! Tweet text normalisation: tokenisation, conversion lists, lemma lookup and
//! stopword removal.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    stopwords: BTreeSet<String>,
    conversions: BTreeMap<String, String>,
    lemmas: BTreeMap<String, String>,
}

impl Lexicon {
    /// Builds a lexicon, lowercasing every entry.
    ///
    /// Fails when a conversion produces a stopword, since that token could
    /// never survive normalisation.
    pub fn new<S, C, L>(stopwords: S, conversions: C, lemmas: L) -> Result<Self>
    where
        S: IntoIterator<Item = String>,
        C: IntoIterator<Item = (String, String)>,
        L: IntoIterator<Item = (String, String)>,
    {
        let lower = |s: String| s.trim().to_lowercase();
        let stopwords: BTreeSet<String> = stopwords
            .into_iter()
            .map(lower)
            .filter(|s| !s.is_empty())
            .collect();
        let conversions: BTreeMap<String, String> = conversions
            .into_iter()
            .map(|(k, v)| (lower(k), lower(v)))
            .collect();
        let lemmas: BTreeMap<String, String> =
            lemmas.into_iter().map(|(k, v)| (lower(k), lower(v))).collect();
        for (from, to) in &conversions {
            if to.split_whitespace().any(|w| stopwords.contains(w)) {
                return Err(Error::Config(format!(
                    "conversion `{from}` -> `{to}` produces a stopword"
                )));
            }
        }
        Ok(Lexicon {
            stopwords,
            conversions,
            lemmas,
        })
    }

    /// Loads a stopword list (one per line) and tab-separated conversion and
    /// lemma tables. Missing paths mean empty tables.
    pub fn load(
        stopwords: Option<&Path>,
        conversions: Option<&Path>,
        lemmas: Option<&Path>,
    ) -> Result<Self> {
        let stop = match stopwords {
            Some(p) => read_lines(p)?,
            None => Vec::new(),
        };
        let conv = match conversions {
            Some(p) => read_pairs(p)?,
            None => Vec::new(),
        };
        let lem = match lemmas {
            Some(p) => read_pairs(p)?,
            None => Vec::new(),
        };
        Lexicon::new(stop, conv, lem)
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn conversions(&self) -> &BTreeMap<String, String> {
        &self.conversions
    }

    pub fn lemmas(&self) -> &BTreeMap<String, String> {
        &self.lemmas
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// True when every normalised output is a fixed point of normalisation,
    /// which makes [`normalize`] idempotent.
    pub fn is_closed(&self) -> bool {
        let fixed = |w: &str| {
            !self.conversions.contains_key(w)
                && self.lemmas.get(w).is_none_or(|l| l == w)
                && !self.stopwords.contains(w)
        };
        let lemma_of = |w: &str| self.lemmas.get(w).cloned().unwrap_or_else(|| w.to_string());
        self.lemmas
            .values()
            .filter(|l| !self.stopwords.contains(l.as_str()))
            .all(|l| fixed(l))
            && self
                .conversions
                .values()
                .flat_map(|v| v.split_whitespace())
                .map(lemma_of)
                .filter(|l| !self.stopwords.contains(l.as_str()))
                .all(|l| fixed(&l))
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((from, to)) if !from.trim().is_empty() && !to.trim().is_empty() => {
                pairs.push((from.to_string(), to.to_string()))
            }
            _ => {
                return Err(Error::Record {
                    line: idx + 1,
                    message: format!("{}: expected `from<TAB>to`", path.display()),
                })
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

/// Splits tweet text into lowercase tokens.
///
/// URLs and `@`-mentions are dropped, hashtags keep their body, and
/// non-alphanumeric characters are trimmed from token edges while interior
/// punctuation (`follow-us`) stays.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(clean_token).collect()
}

fn clean_token(raw: &str) -> Option<String> {
    let lowered = raw.to_lowercase();
    if lowered.contains("://") || lowered.starts_with("www.") {
        return None;
    }
    let lead_trimmed = lowered.trim_start_matches(|c: char| !c.is_alphanumeric() && c != '#' && c != '@');
    if lead_trimmed.starts_with('@') {
        return None;
    }
    let body = lead_trimmed
        .trim_start_matches('#')
        .trim_matches(|c: char| !c.is_alphanumeric());
    if body.is_empty() || body.contains(['#', '@']) || body.contains("www.") {
        return None;
    }
    Some(body.to_string())
}

/// Applies conversions, then lemmas, then removes stopwords. Order is kept.
pub fn normalize(tokens: &[String], lexicon: &Lexicon) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for token in tokens {
        match lexicon.conversions.get(token.as_str()) {
            Some(converted) => {
                for word in converted.split_whitespace() {
                    push_lemma(word, lexicon, &mut out);
                }
            }
            None => push_lemma(token, lexicon, &mut out),
        }
    }
    out
}

fn push_lemma(word: &str, lexicon: &Lexicon, out: &mut Vec<String>) {
    let lemma = lexicon.lemmas.get(word).map_or(word, String::as_str);
    if !lexicon.stopwords.contains(lemma) {
        out.push(lemma.to_string());
    }
}

pub fn prepare(doc_id: &str, text: &str, lexicon: &Lexicon) -> TokenizedDoc {
    TokenizedDoc {
        doc_id: doc_id.to_string(),
        tokens: normalize(&tokenize(text), lexicon),
    }
}
