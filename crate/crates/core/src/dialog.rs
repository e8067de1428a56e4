//! Topic-linked conversation management.
//!
//! Retrieval engines are unlocked by turn: the first response may only come
//! from the TV-program engine, the second may also use daily-life, and from
//! the third on news/SNS joins. Every candidate cue is compared with the
//! latest robot/user exchange by WMD similarity; the best one is spoken if it
//! clears the threshold, otherwise the generative engine answers.

use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{fnv1a, EmbeddingStore};
use crate::keywords::Tokenizer;
use crate::wmd::{nbow, relaxed_wmd, to_similarity, wmd, WeightedDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineId {
    TvProgram,
    DailyLife,
    NewsSns,
    Generative,
}

impl EngineId {
    pub const RETRIEVAL: [EngineId; 3] = [EngineId::TvProgram, EngineId::DailyLife, EngineId::NewsSns];

    pub fn as_str(self) -> &'static str {
        match self {
            EngineId::TvProgram => "tv_program",
            EngineId::DailyLife => "daily_life",
            EngineId::NewsSns => "news_sns",
            EngineId::Generative => "generative",
        }
    }
}

impl fmt::Display for EngineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DialogError {
    #[error("turn index must be at least 1, got {0}")]
    BadTurn(u32),
    #[error("no dialog engines registered")]
    NoEngines,
}

/// Retrieval engines usable at `turn_index`. The generative engine is never
/// listed; it is only a fallback.
pub fn available_engines(turn_index: u32) -> Result<Vec<EngineId>, DialogError> {
    match turn_index {
        0 => Err(DialogError::BadTurn(0)),
        1 => Ok(vec![EngineId::TvProgram]),
        2 => Ok(vec![EngineId::TvProgram, EngineId::DailyLife]),
        _ => Ok(EngineId::RETRIEVAL.to_vec()),
    }
}

/// What the dialog manager sees of the conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogContext {
    pub turn_index: u32,
    pub last_robot_utterance: String,
    pub last_user_utterance: String,
    pub topic_keyword: Option<String>,
}

/// A retrieval record: `cue` is matched, `reply` is spoken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub cue: String,
    pub reply: String,
    /// Unix seconds; used for the news recency filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

pub trait DialogEngine: Send + Sync {
    fn id(&self) -> EngineId;
    fn candidates(&self, context: &DialogContext) -> Vec<Candidate>;
}

/// Engine backed by a fixed list of cue/reply pairs.
#[derive(Debug, Clone)]
pub struct RetrievalEngine {
    id: EngineId,
    records: Vec<Candidate>,
}

impl RetrievalEngine {
    pub fn new(id: EngineId, records: Vec<Candidate>) -> Self {
        RetrievalEngine { id, records }
    }

    pub fn records(&self) -> &[Candidate] {
        &self.records
    }
}

impl DialogEngine for RetrievalEngine {
    fn id(&self) -> EngineId {
        self.id
    }

    fn candidates(&self, _context: &DialogContext) -> Vec<Candidate> {
        self.records.clone()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: reply is empty")]
    EmptyReply { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a JSON-lines engine corpus of `{cue, reply, timestamp?}` records.
pub fn load_corpus<R: BufRead>(source: R) -> Result<Vec<Candidate>, CorpusError> {
    let mut out = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: Candidate = serde_json::from_str(&line).map_err(|source| CorpusError::Parse { line: n + 1, source })?;
        if c.reply.trim().is_empty() {
            return Err(CorpusError::EmptyReply { line: n + 1 });
        }
        out.push(c);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DialogConfig {
    /// Minimum WMD similarity for a retrieval reply.
    pub wmd_threshold: f64,
    /// News/SNS records older than this many seconds before `reference_time`
    /// are ignored.
    pub news_max_age_s: f64,
    /// Session start in Unix seconds; without it the news filter is off.
    pub reference_time: Option<f64>,
    pub acknowledgments: Vec<String>,
    /// Exact WMD evaluations allowed per engine when pruning.
    pub candidate_cap: usize,
    pub prune: bool,
}

impl Default for DialogConfig {
    fn default() -> Self {
        DialogConfig {
            wmd_threshold: 0.35,
            news_max_age_s: 7.0 * 86_400.0,
            reference_time: None,
            acknowledgments: vec!["I see.".into(), "Is that so?".into(), "Tell me more.".into()],
            candidate_cap: 50,
            prune: true,
        }
    }
}

/// Produces a reply when retrieval has nothing good enough.
pub trait GenerativeEngine: Send + Sync {
    fn reply(&self, context: &DialogContext, config: &DialogConfig) -> String;
}

/// Local stand-in for a response-generation model: a deterministic pick from
/// the acknowledgment list keyed by the user's words.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinGenerative;

impl GenerativeEngine for BuiltinGenerative {
    fn reply(&self, context: &DialogContext, config: &DialogConfig) -> String {
        builtin_generative(&context.last_user_utterance, &config.acknowledgments)
    }
}

pub fn builtin_generative(user_utterance: &str, acknowledgments: &[String]) -> String {
    if acknowledgments.is_empty() {
        return "I see.".to_string();
    }
    if user_utterance.is_empty() {
        return acknowledgments[0].clone();
    }
    let i = (fnv1a(user_utterance.as_bytes()) % acknowledgments.len() as u64) as usize;
    acknowledgments[i].clone()
}

/// The chosen reply. Retrieval replies carry their WMD score; generative
/// replies carry none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub reply: String,
    pub engine: EngineId,
    pub similarity: Option<f64>,
    pub distance: Option<f64>,
}

struct Scored {
    engine: EngineId,
    index: usize,
    distance: f64,
}

impl Scored {
    fn beats(&self, other: &Scored) -> bool {
        (self.distance, self.engine, self.index) < (other.distance, other.engine, other.index)
    }
}

pub struct DialogManager {
    engines: Vec<Box<dyn DialogEngine>>,
    generative: Box<dyn GenerativeEngine>,
    tokenizer: Arc<dyn Tokenizer>,
    store: Arc<EmbeddingStore>,
}

impl fmt::Debug for DialogManager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DialogManager")
            .field("engines", &self.engines.iter().map(|e| e.id()).collect::<Vec<_>>())
            .finish()
    }
}

impl DialogManager {
    pub fn new(
        engines: Vec<Box<dyn DialogEngine>>,
        generative: Box<dyn GenerativeEngine>,
        tokenizer: Arc<dyn Tokenizer>,
        store: Arc<EmbeddingStore>,
    ) -> Self {
        DialogManager { engines, generative, tokenizer, store }
    }

    pub fn set_generative(&mut self, generative: Box<dyn GenerativeEngine>) {
        self.generative = generative;
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    fn doc(&self, text: &str) -> Option<WeightedDoc> {
        nbow(&self.tokenizer.tokenize(text), &self.store).ok()
    }

    fn fallback(&self, context: &DialogContext, config: &DialogConfig) -> ScoredCandidate {
        ScoredCandidate {
            reply: self.generative.reply(context, config),
            engine: EngineId::Generative,
            similarity: None,
            distance: None,
        }
    }

    pub fn respond(&self, context: &DialogContext, config: &DialogConfig) -> Result<ScoredCandidate, DialogError> {
        if self.engines.is_empty() {
            return Err(DialogError::NoEngines);
        }
        let available = available_engines(context.turn_index)?;
        let text = format!("{} {}", context.last_robot_utterance, context.last_user_utterance);
        let Some(query) = self.doc(&text) else {
            return Ok(self.fallback(context, config));
        };

        let mut engines: Vec<&dyn DialogEngine> =
            self.engines.iter().map(|e| e.as_ref()).filter(|e| available.contains(&e.id())).collect();
        engines.sort_by_key(|e| e.id());

        let mut pool: Vec<(EngineId, usize, Candidate, WeightedDoc)> = Vec::new();
        for engine in engines {
            for (index, c) in engine.candidates(context).into_iter().enumerate() {
                if engine.id() == EngineId::NewsSns && is_stale(&c, config) {
                    continue;
                }
                if let Some(doc) = self.doc(&c.cue) {
                    pool.push((engine.id(), index, c, doc));
                }
            }
        }

        let best = if config.prune {
            self.search_pruned(&query, &pool, config.candidate_cap)
        } else {
            self.search_exhaustive(&query, &pool)
        };

        let Some(best) = best else {
            return Ok(self.fallback(context, config));
        };
        let similarity = to_similarity(best.distance).expect("wmd is finite and non-negative");
        if similarity < config.wmd_threshold {
            log::debug!("best retrieval similarity {similarity:.3} below threshold {}", config.wmd_threshold);
            return Ok(self.fallback(context, config));
        }
        let (_, _, candidate, _) =
            pool.iter().find(|(e, i, _, _)| *e == best.engine && *i == best.index).expect("best comes from pool");
        Ok(ScoredCandidate {
            reply: candidate.reply.clone(),
            engine: best.engine,
            similarity: Some(similarity),
            distance: Some(best.distance),
        })
    }

    fn search_exhaustive(
        &self,
        query: &WeightedDoc,
        pool: &[(EngineId, usize, Candidate, WeightedDoc)],
    ) -> Option<Scored> {
        let mut best: Option<Scored> = None;
        for (engine, index, _, doc) in pool {
            let s = Scored { engine: *engine, index: *index, distance: wmd(query, doc, &self.store).0 };
            if best.as_ref().is_none_or(|b| s.beats(b)) {
                best = Some(s);
            }
        }
        best
    }

    /// Visits candidates in order of their relaxed lower bound and stops once
    /// the bound exceeds the best exact distance found.
    fn search_pruned(
        &self,
        query: &WeightedDoc,
        pool: &[(EngineId, usize, Candidate, WeightedDoc)],
        cap: usize,
    ) -> Option<Scored> {
        let mut bounded: Vec<(f64, EngineId, usize, &WeightedDoc)> =
            pool.iter().map(|(e, i, _, d)| (relaxed_wmd(query, d, &self.store), *e, *i, d)).collect();
        bounded.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut per_engine = std::collections::HashMap::new();
        bounded.retain(|(_, e, _, _)| {
            let n = per_engine.entry(*e).or_insert(0usize);
            *n += 1;
            *n <= cap
        });

        let mut best: Option<Scored> = None;
        for (bound, engine, index, doc) in bounded {
            if best.as_ref().is_some_and(|b| bound > b.distance) {
                break;
            }
            let s = Scored { engine, index, distance: wmd(query, doc, &self.store).0 };
            if best.as_ref().is_none_or(|b| s.beats(b)) {
                best = Some(s);
            }
        }
        best
    }
}

fn is_stale(c: &Candidate, config: &DialogConfig) -> bool {
    match (c.timestamp, config.reference_time) {
        (Some(ts), Some(reference)) => ts < reference - config.news_max_age_s,
        _ => false,
    }
}
