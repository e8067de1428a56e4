//! Keyword extraction from the simulated TV feed.
//!
//! Captions are tokenized, stopword-filtered and kept only when the token has
//! a word vector. Object-detection labels become keywords directly when their
//! confidence clears the threshold. Keywords that were just spoken cool down
//! for a number of robot utterance slots before they can be picked again.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedKind {
    Caption,
    Detection,
}

/// One line of the feed file: `{"t": 12.5, "kind": "caption", "text": "..."}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedEvent {
    pub t: f64,
    pub kind: FeedKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl FeedEvent {
    pub fn caption(t: f64, text: impl Into<String>) -> Self {
        FeedEvent { t, kind: FeedKind::Caption, text: text.into(), confidence: None }
    }

    pub fn detection(t: f64, label: impl Into<String>, confidence: f64) -> Self {
        FeedEvent { t, kind: FeedKind::Detection, text: label.into(), confidence: Some(confidence) }
    }

    /// Captions always count as fully confident.
    pub fn effective_confidence(&self) -> f64 {
        match self.kind {
            FeedKind::Caption => 1.0,
            FeedKind::Detection => self.confidence.unwrap_or(1.0),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeedError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: timestamp {t} goes backwards")]
    NotMonotone { line: usize, t: f64 },
    #[error("line {line}: caption text is empty")]
    EmptyCaption { line: usize },
    #[error("line {line}: confidence {value} outside [0, 1]")]
    BadConfidence { line: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a JSON-lines feed, checking timestamps never decrease.
pub fn read_feed<R: BufRead>(source: R) -> Result<Vec<FeedEvent>, FeedError> {
    let mut events: Vec<FeedEvent> = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: FeedEvent =
            serde_json::from_str(&line).map_err(|source| FeedError::Parse { line: line_no, source })?;
        validate_feed_event(&event).map_err(|e| e.at_line(line_no))?;
        if let Some(prev) = events.last() {
            if event.t < prev.t {
                return Err(FeedError::NotMonotone { line: line_no, t: event.t });
            }
        }
        events.push(event);
    }
    Ok(events)
}

impl FeedError {
    fn at_line(self, line: usize) -> Self {
        match self {
            FeedError::EmptyCaption { .. } => FeedError::EmptyCaption { line },
            FeedError::BadConfidence { value, .. } => FeedError::BadConfidence { line, value },
            other => other,
        }
    }
}

/// Checks a single event's own invariants (no ordering check).
pub fn validate_feed_event(event: &FeedEvent) -> Result<(), FeedError> {
    if event.kind == FeedKind::Caption && event.text.trim().is_empty() {
        return Err(FeedError::EmptyCaption { line: 0 });
    }
    if let Some(c) = event.confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(FeedError::BadConfidence { line: 0, value: c });
        }
    }
    Ok(())
}

/// Splits text into words. Implementations must be deterministic and must
/// never emit empty tokens.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Lowercasing whitespace/punctuation splitter with a user dictionary of
/// protected multiword surfaces (e.g. "ice cream"), matched greedily, longest
/// entry first, before ordinary splitting.
#[derive(Debug, Clone, Default)]
pub struct DefaultTokenizer {
    // Lowercased entries as char vectors, longest first.
    dictionary: Vec<Vec<char>>,
}

impl DefaultTokenizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dictionary<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut dictionary: Vec<Vec<char>> = entries
            .into_iter()
            .map(|e| e.as_ref().trim().to_lowercase())
            .filter(|e| !e.is_empty())
            .map(|e| e.chars().collect())
            .collect();
        dictionary.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        dictionary.dedup();
        DefaultTokenizer { dictionary }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '’'
}

fn trim_apostrophes(s: &str) -> &str {
    s.trim_matches(|c| c == '\'' || c == '’')
}

impl Tokenizer for DefaultTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if !is_word_char(chars[i]) {
                i += 1;
                continue;
            }
            // At a token start: try protected entries first.
            let matched = self.dictionary.iter().find(|entry| {
                let end = i + entry.len();
                end <= chars.len() && chars[i..end] == entry[..] && (end == chars.len() || !is_word_char(chars[end]))
            });
            if let Some(entry) = matched {
                tokens.push(entry.iter().collect());
                i += entry.len();
                continue;
            }
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let word = trim_apostrophes(&word);
            if !word.is_empty() {
                tokens.push(word.to_string());
            }
        }
        tokens
    }
}

/// Convenience wrapper around [`DefaultTokenizer`] with no dictionary.
pub fn tokenize_default(text: &str) -> Vec<String> {
    DefaultTokenizer::new().tokenize(text)
}

/// Reads a one-entry-per-line list (stopwords, user dictionary). Blank lines
/// and `#` comments are skipped; an empty file is a valid empty list.
pub fn read_word_list<R: BufRead>(source: R) -> std::io::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in source.lines() {
        let line = line?;
        let entry = line.trim();
        if entry.is_empty() || entry.starts_with('#') {
            continue;
        }
        out.push(entry.to_string());
    }
    Ok(out)
}

pub fn read_word_list_file(path: &Path) -> std::io::Result<Vec<String>> {
    read_word_list(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub surface: String,
    pub source: FeedKind,
    pub first_seen: f64,
    pub occurrences: u32,
    /// Utterance slot before which the keyword may not be picked again.
    pub cooldown_until_utterance: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeywordConfig {
    pub min_confidence: f64,
    pub cooldown_utterances: u64,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        KeywordConfig { min_confidence: 0.5, cooldown_utterances: 10 }
    }
}

/// Keywords seen so far in one session, keyed by surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeywordPool {
    keywords: BTreeMap<String, Keyword>,
}

impl KeywordPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&Keyword> {
        self.keywords.get(surface)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Keyword> {
        self.keywords.values()
    }

    /// Adds one occurrence of `surface`. Returns true when the keyword is new.
    pub fn upsert(&mut self, surface: &str, source: FeedKind, t: f64) -> bool {
        match self.keywords.get_mut(surface) {
            Some(k) => {
                k.occurrences += 1;
                if t < k.first_seen {
                    k.first_seen = t;
                }
                false
            }
            None => {
                self.keywords.insert(
                    surface.to_string(),
                    Keyword {
                        surface: surface.to_string(),
                        source,
                        first_seen: t,
                        occurrences: 1,
                        cooldown_until_utterance: 0,
                    },
                );
                true
            }
        }
    }

    /// Picks the best keyword that is not cooling down at `current_seq` and
    /// stamps its cooldown. Priority: most recent `first_seen`, then more
    /// occurrences, then lexicographic surface.
    pub fn next_keyword(&mut self, current_seq: u64, cooldown_utterances: u64) -> Option<Keyword> {
        let best = self
            .keywords
            .values()
            .filter(|k| k.cooldown_until_utterance <= current_seq)
            .min_by(|a, b| {
                b.first_seen
                    .total_cmp(&a.first_seen)
                    .then(b.occurrences.cmp(&a.occurrences))
                    .then_with(|| a.surface.cmp(&b.surface))
            })?
            .surface
            .clone();
        let k = self.keywords.get_mut(&best).expect("selected from pool");
        k.cooldown_until_utterance = k.cooldown_until_utterance.max(current_seq + cooldown_utterances);
        Some(k.clone())
    }
}

/// A keyword surface produced by [`KeywordExtractor::ingest`].
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub surface: String,
    pub source: FeedKind,
    /// True when the surface entered the pool for the first time.
    pub new: bool,
}

/// Turns feed events into pool updates.
pub struct KeywordExtractor {
    tokenizer: Arc<dyn Tokenizer>,
    stopwords: HashSet<String>,
    store: Arc<EmbeddingStore>,
}

impl std::fmt::Debug for KeywordExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeywordExtractor")
            .field("stopwords", &self.stopwords.len())
            .field("vocab", &self.store.vocab_size())
            .finish()
    }
}

impl KeywordExtractor {
    pub fn new<I, S>(tokenizer: Arc<dyn Tokenizer>, stopwords: I, store: Arc<EmbeddingStore>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stopwords = stopwords.into_iter().map(|s| s.as_ref().to_lowercase()).collect();
        KeywordExtractor { tokenizer, stopwords, store }
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(&word.to_lowercase())
    }

    /// Applies one feed event to `pool` and reports every surface it touched.
    pub fn ingest(&self, event: &FeedEvent, pool: &mut KeywordPool, config: &KeywordConfig) -> Vec<Extracted> {
        let mut out = Vec::new();
        match event.kind {
            FeedKind::Caption => {
                for token in self.tokenizer.tokenize(&event.text) {
                    if self.is_stopword(&token) || !self.store.contains(&token) {
                        continue;
                    }
                    let new = pool.upsert(&token, FeedKind::Caption, event.t);
                    out.push(Extracted { surface: token, source: FeedKind::Caption, new });
                }
            }
            FeedKind::Detection => {
                let confidence = event.effective_confidence();
                let label = event.text.trim();
                if confidence < config.min_confidence {
                    log::debug!("dropping detection {label:?}: confidence {confidence} < {}", config.min_confidence);
                } else if label.is_empty() || self.is_stopword(label) {
                    log::debug!("dropping detection {label:?}");
                } else {
                    let new = pool.upsert(label, FeedKind::Detection, event.t);
                    out.push(Extracted { surface: label.to_string(), source: FeedKind::Detection, new });
                }
            }
        }
        out
    }
}
