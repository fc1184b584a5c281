//! Space tokenization, frequency-indexed vocabulary and fixed-length
//! integer encoding.
//!
//! Tokens are maximal runs of non-space characters, so line breaks stay
//! attached to the preceding fragment (`{\n`, `}\n\n`). Index 0 is padding,
//! index 1 is out-of-vocabulary, and real tokens start at 2.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
/// First index assigned to a real token.
pub const FIRST_TOKEN_ID: u32 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    /// Exact-match token rewrites (the stemming/lemmatization hook).
    pub replacements: BTreeMap<String, String>,
    pub max_sequence_length: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: false,
            stopwords: BTreeSet::new(),
            replacements: BTreeMap::new(),
            max_sequence_length: 500,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sequence_length == 0 {
            return Err(Error::value("max_sequence_length must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Splits on runs of U+0020, then lowercases (if configured) and normalizes.
pub fn tokenize(source: &str, config: &TokenizerConfig) -> TokenSequence {
    let raw: TokenSequence = source
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(|t| {
            if config.lowercase {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect();
    normalize_tokens(raw, config)
}

/// Drops exact-match stopwords, then applies the replacement table.
pub fn normalize_tokens(tokens: TokenSequence, config: &TokenizerConfig) -> TokenSequence {
    if config.stopwords.is_empty() && config.replacements.is_empty() {
        return tokens;
    }
    tokens
        .tokens
        .into_iter()
        .filter(|t| !config.stopwords.contains(t))
        .map(|t| config.replacements.get(&t).cloned().unwrap_or(t))
        .filter(|t| !t.is_empty() && !t.contains(' '))
        .collect()
}

/// Frequency-ordered token index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    index_of: HashMap<String, u32>,
    token_of: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens already in index order (2, 3, ...).
    pub fn from_ordered_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Format("empty token in vocabulary".into()));
            }
            if index_of.insert(t.clone(), i as u32 + FIRST_TOKEN_ID).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            index_of,
            token_of: tokens,
        })
    }

    /// Number of real tokens (excluding padding and OOV).
    pub fn size(&self) -> usize {
        self.token_of.len()
    }

    /// Rows an embedding matrix over this vocabulary needs (`size + 2`).
    pub fn rows(&self) -> usize {
        self.size() + FIRST_TOKEN_ID as usize
    }

    /// Index of `token`, or [`OOV_ID`].
    pub fn index(&self, token: &str) -> u32 {
        self.index_of.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index_of.get(token).copied()
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        index
            .checked_sub(FIRST_TOKEN_ID)
            .and_then(|i| self.token_of.get(i as usize))
            .map(String::as_str)
    }

    /// `(index, token)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (i as u32 + FIRST_TOKEN_ID, t.as_str()))
    }

    /// One `<index>\t<escaped token>` line per token, in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.iter() {
            out.push_str(&i.to_string());
            out.push('\t');
            out.push_str(&escape_token(t));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (idx, tok) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!("vocabulary line {}: missing tab", lineno + 1))
            })?;
            let idx: u32 = idx.parse().map_err(|_| {
                Error::Format(format!("vocabulary line {}: bad index {idx:?}", lineno + 1))
            })?;
            let expected = tokens.len() as u32 + FIRST_TOKEN_ID;
            if idx != expected {
                return Err(Error::Format(format!(
                    "vocabulary line {}: index {idx}, expected {expected}",
                    lineno + 1
                )));
            }
            tokens.push(unescape_token(tok)?);
        }
        Vocabulary::from_ordered_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_text(&text)
    }
}

/// Escapes `\`, newline, carriage return and tab so a token fits on one line.
pub fn escape_token(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_token(escaped: &str) -> Result<String> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            other => {
                return Err(Error::Format(format!(
                    "bad escape \\{} in token {escaped:?}",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Token counts sorted by descending count, ties broken lexicographically.
pub fn ranked_counts<'a>(sequences: impl IntoIterator<Item = &'a TokenSequence>) -> Vec<(String, u64)> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for seq in sequences {
        for t in seq.iter() {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts
        .into_iter()
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Gives the `max_vocab` most frequent tokens indices `2..=max_vocab+1`.
pub fn build_vocabulary(corpus: &[TokenSequence], max_vocab: usize) -> Result<Vocabulary> {
    if max_vocab == 0 {
        return Err(Error::value("max_vocab must be at least 1"));
    }
    if corpus.iter().all(TokenSequence::is_empty) {
        return Err(Error::value("cannot build a vocabulary from an empty corpus"));
    }
    let tokens = ranked_counts(corpus)
        .into_iter()
        .take(max_vocab)
        .map(|(t, _)| t)
        .collect();
    Vocabulary::from_ordered_tokens(tokens)
}

/// Fixed-length id sequence; padding (0) only as a suffix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-padding positions.
    pub fn valid_len(&self) -> usize {
        self.ids.iter().take_while(|&&id| id != PAD_ID).count()
    }

    /// Space-separated ids.
    pub fn to_line(&self) -> String {
        let parts: Vec<String> = self.ids.iter().map(u32::to_string).collect();
        parts.join(" ")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let ids = line
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|_| Error::Format(format!("bad token id {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedSequence { ids })
    }
}

/// Maps tokens to ids (OOV -> 1), keeps the first `max_sequence_length`
/// tokens and right-pads with 0.
pub fn encode(tokens: &TokenSequence, vocab: &Vocabulary, max_sequence_length: usize) -> EncodedSequence {
    let mut ids: Vec<u32> = tokens
        .iter()
        .take(max_sequence_length)
        .map(|t| vocab.index(t))
        .collect();
    ids.resize(max_sequence_length, PAD_ID);
    EncodedSequence { ids }
}
