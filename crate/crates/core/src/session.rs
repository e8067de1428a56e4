//! The two-mode session machine.
//!
//! In TV-watching mode the robot speaks at Poisson-process times: each slot
//! draws disclosure or question, takes the next keyword off cooldown and
//! realizes a template. A question switches to conversation mode, where user
//! utterances are answered by the dialog manager until the user signals the
//! end, stays silent too often, or the conversation is cancelled.
//!
//! The session is a discrete-event machine over logical seconds. Timer
//! expiries (utterance slots, silence deadlines) are processed at their own
//! timestamps, so the transcript does not depend on how often the caller
//! advances the clock.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{DialogConfig, DialogContext, EngineId};
use crate::keywords::{FeedEvent, FeedKind, KeywordConfig, KeywordPool};
use crate::resources::Resources;
use crate::templates::{realize, TemplateKind, UtteranceKind};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("mean_interval_s must be positive and finite, got {0}")]
    MeanInterval(f64),
    #[error("disclosure_ratio must be within [0, 1], got {0}")]
    DisclosureRatio(f64),
    #[error("silence_timeout_s must be positive and finite, got {0}")]
    SilenceTimeout(f64),
    #[error("wmd_threshold must be finite, got {0}")]
    Threshold(f64),
    #[error("min_confidence must be within [0, 1], got {0}")]
    MinConfidence(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub mean_interval_s: f64,
    pub disclosure_ratio: f64,
    pub silence_timeout_s: f64,
    pub max_no_answer: u32,
    pub wmd_threshold: f64,
    pub cooldown_utterances: u64,
    pub rng_seed: u64,
    pub min_confidence: f64,
    pub end_lexicon: Vec<String>,
    pub news_max_age_s: f64,
    /// Session start in Unix seconds, for the news recency filter.
    pub reference_time: Option<f64>,
    pub acknowledgments: Vec<String>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let dialog = DialogConfig::default();
        let keywords = KeywordConfig::default();
        SessionConfig {
            mean_interval_s: 80.0,
            disclosure_ratio: 0.75,
            silence_timeout_s: 15.0,
            max_no_answer: 2,
            wmd_threshold: dialog.wmd_threshold,
            cooldown_utterances: keywords.cooldown_utterances,
            rng_seed: 0,
            min_confidence: keywords.min_confidence,
            end_lexicon: ["bye", "stop", "let's watch", "that's enough"].map(String::from).to_vec(),
            news_max_age_s: dialog.news_max_age_s,
            reference_time: None,
            acknowledgments: dialog.acknowledgments,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.mean_interval_s.is_finite() && self.mean_interval_s > 0.0) {
            return Err(ConfigError::MeanInterval(self.mean_interval_s));
        }
        if !(0.0..=1.0).contains(&self.disclosure_ratio) {
            return Err(ConfigError::DisclosureRatio(self.disclosure_ratio));
        }
        if !(self.silence_timeout_s.is_finite() && self.silence_timeout_s > 0.0) {
            return Err(ConfigError::SilenceTimeout(self.silence_timeout_s));
        }
        if !self.wmd_threshold.is_finite() {
            return Err(ConfigError::Threshold(self.wmd_threshold));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(ConfigError::MinConfidence(self.min_confidence));
        }
        Ok(())
    }

    pub fn dialog_config(&self) -> DialogConfig {
        DialogConfig {
            wmd_threshold: self.wmd_threshold,
            news_max_age_s: self.news_max_age_s,
            reference_time: self.reference_time,
            acknowledgments: self.acknowledgments.clone(),
            ..DialogConfig::default()
        }
    }

    pub fn keyword_config(&self) -> KeywordConfig {
        KeywordConfig { min_confidence: self.min_confidence, cooldown_utterances: self.cooldown_utterances }
    }

    /// True when `text` contains an end-of-conversation phrase.
    pub fn is_end_intent(&self, text: &str) -> bool {
        let text = normalize_quotes(&text.to_lowercase());
        self.end_lexicon.iter().map(|e| normalize_quotes(&e.to_lowercase())).any(|e| !e.is_empty() && text.contains(&e))
    }
}

fn normalize_quotes(s: &str) -> String {
    s.replace('’', "'")
}

#[derive(Debug, Error, PartialEq)]
#[error("mean interval must be positive and finite, got {0}")]
pub struct BadInterval(pub f64);

/// Next utterance time: `now` plus an exponential inter-arrival with the given
/// mean, clamped to `[1 s, 10 × mean]`.
pub fn schedule_next<R: Rng + ?Sized>(now: f64, mean_interval_s: f64, rng: &mut R) -> Result<f64, BadInterval> {
    if !(mean_interval_s.is_finite() && mean_interval_s > 0.0) {
        return Err(BadInterval(mean_interval_s));
    }
    let exp = Exp::new(1.0 / mean_interval_s).map_err(|_| BadInterval(mean_interval_s))?;
    let upper = 10.0 * mean_interval_s;
    let delta: f64 = exp.sample(rng);
    Ok(now + delta.max(1.0_f64.min(upper)).min(upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "TVWatching")]
    TvWatching,
    Conversing,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::TvWatching => "TVWatching",
            Mode::Conversing => "Conversing",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Robot,
    User,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Disclosure,
    Question,
    Response,
    User,
    Event,
}

impl From<UtteranceKind> for EntryKind {
    fn from(k: UtteranceKind) -> Self {
        match k {
            UtteranceKind::Disclosure => EntryKind::Disclosure,
            UtteranceKind::Question => EntryKind::Question,
            UtteranceKind::Response => EntryKind::Response,
        }
    }
}

/// Why the mode changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Question,
    EndIntent,
    NoAnswer,
    Cancel,
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cause::Question => "question",
            Cause::EndIntent => "end_intent",
            Cause::NoAnswer => "no_answer",
            Cause::Cancel => "cancel",
        })
    }
}

/// Structured payload of a system transcript entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SystemEvent {
    ModeChanged { from: Mode, to: Mode, cause: Cause },
    CaptionShown,
    KeywordExtracted { surface: String, source: FeedKind },
    ConversationEnded { turns: u32, cause: Cause },
    Cancelled,
}

/// One line of the transcript log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t: f64,
    pub speaker: Speaker,
    pub text: String,
    pub kind: EntryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversation_id: Option<u64>,
    /// Keyword used by a TV-watching utterance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword: Option<String>,
    /// Utterance slot that consumed `keyword`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    /// Set on a robot utterance that repeats the previous one after silence.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<SystemEvent>,
}

impl TranscriptEntry {
    fn new(t: f64, speaker: Speaker, kind: EntryKind, text: impl Into<String>) -> Self {
        TranscriptEntry {
            t,
            speaker,
            text: text.into(),
            kind,
            engine: None,
            conversation_id: None,
            keyword: None,
            seq: None,
            similarity: None,
            repeat: false,
            event: None,
        }
    }

    fn system(t: f64, event: SystemEvent, text: impl Into<String>) -> Self {
        TranscriptEntry { event: Some(event), ..Self::new(t, Speaker::System, EntryKind::Event, text) }
    }

    /// Robot or user utterance (not a system entry).
    pub fn is_utterance(&self) -> bool {
        matches!(self.speaker, Speaker::Robot | Speaker::User)
    }
}

/// Observable state of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub mode: Mode,
    pub clock: f64,
    pub next_utterance_at: f64,
    /// Utterance slots elapsed in TV-watching mode, including slots skipped
    /// for lack of a keyword. Keyword cooldowns are counted in these units.
    pub utterance_seq: u64,
    pub no_answer_count: u32,
    /// Dialog turn index of the next response: 1 right after the opening
    /// question, 0 outside conversations.
    pub conversation_turn: u32,
    pub transcript: Vec<TranscriptEntry>,
    pub rng_seed: u64,
    pub silence_deadline: Option<f64>,
    pub conversation_id: Option<u64>,
    /// Robot and user utterances in the current conversation.
    pub conversation_utterances: u32,
}

pub struct Session {
    resources: Arc<Resources>,
    config: SessionConfig,
    rng: ChaCha8Rng,
    pool: KeywordPool,
    state: SessionState,
    conversations_started: u64,
    topic_keyword: Option<String>,
    cancelled_at_len: Option<usize>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session").field("config", &self.config).field("state", &self.state).finish()
    }
}

impl Session {
    pub fn new(resources: Arc<Resources>, config: SessionConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let next = schedule_next(0.0, config.mean_interval_s, &mut rng).expect("validated");
        let state = SessionState {
            mode: Mode::TvWatching,
            clock: 0.0,
            next_utterance_at: next,
            utterance_seq: 0,
            no_answer_count: 0,
            conversation_turn: 0,
            transcript: Vec::new(),
            rng_seed: config.rng_seed,
            silence_deadline: None,
            conversation_id: None,
            conversation_utterances: 0,
        };
        Ok(Session {
            resources,
            config,
            rng,
            pool: KeywordPool::new(),
            state,
            conversations_started: 0,
            topic_keyword: None,
            cancelled_at_len: None,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn pool(&self) -> &KeywordPool {
        &self.pool
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.state.transcript
    }

    /// When the next timer fires: the utterance slot in TV-watching mode, the
    /// silence deadline while conversing.
    pub fn next_timer(&self) -> f64 {
        match self.state.mode {
            Mode::TvWatching => self.state.next_utterance_at,
            Mode::Conversing => self.state.silence_deadline.unwrap_or(f64::INFINITY),
        }
    }

    fn push(&mut self, entry: TranscriptEntry) {
        self.state.transcript.push(entry);
    }

    fn since(&self, start: usize) -> Vec<TranscriptEntry> {
        self.state.transcript[start..].to_vec()
    }

    /// Fires every timer due at or before `now`, in time order, then moves the
    /// clock to `now`. Returns the entries appended.
    pub fn tick(&mut self, now: f64) -> Vec<TranscriptEntry> {
        let start = self.state.transcript.len();
        self.advance_to(now);
        self.since(start)
    }

    fn advance_to(&mut self, now: f64) {
        if now < self.state.clock {
            log::debug!("ignoring clock regression {} -> {now}", self.state.clock);
            return;
        }
        loop {
            let due = self.next_timer();
            if due > now {
                break;
            }
            self.state.clock = due;
            match self.state.mode {
                Mode::TvWatching => self.utterance_slot(due),
                Mode::Conversing => self.silence_at(due),
            }
        }
        self.state.clock = now;
    }

    fn reschedule(&mut self, from: f64) {
        self.state.next_utterance_at =
            schedule_next(from, self.config.mean_interval_s, &mut self.rng).expect("validated");
    }

    fn utterance_slot(&mut self, t: f64) {
        let seq = self.state.utterance_seq;
        self.state.utterance_seq += 1;
        let kind = if self.rng.random_bool(self.config.disclosure_ratio) {
            TemplateKind::Disclosure
        } else {
            TemplateKind::Question
        };
        let Some(keyword) = self.pool.next_keyword(seq, self.config.cooldown_utterances) else {
            self.reschedule(t);
            return;
        };
        let resources = self.resources.clone();
        let template = match resources.templates.select(&keyword.surface, kind, &resources.store) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("skipping utterance slot: {e}");
                self.reschedule(t);
                return;
            }
        };
        let utterance = realize(template, &keyword.surface, t);
        let mut entry = TranscriptEntry::new(t, Speaker::Robot, utterance.kind.into(), utterance.text);
        entry.keyword = Some(keyword.surface.clone());
        entry.seq = Some(seq);

        match kind {
            TemplateKind::Disclosure => {
                self.push(entry);
                self.reschedule(t);
            }
            TemplateKind::Question => {
                self.conversations_started += 1;
                let id = self.conversations_started;
                entry.conversation_id = Some(id);
                self.push(entry);
                self.state.mode = Mode::Conversing;
                self.state.conversation_id = Some(id);
                self.state.conversation_turn = 1;
                self.state.conversation_utterances = 1;
                self.state.no_answer_count = 0;
                self.state.silence_deadline = Some(t + self.config.silence_timeout_s);
                self.topic_keyword = Some(keyword.surface);
                let mut changed = TranscriptEntry::system(
                    t,
                    SystemEvent::ModeChanged { from: Mode::TvWatching, to: Mode::Conversing, cause: Cause::Question },
                    "TVWatching -> Conversing (question)",
                );
                changed.conversation_id = Some(id);
                self.push(changed);
            }
        }
    }

    fn last_robot_entry(&self) -> Option<&TranscriptEntry> {
        self.state.transcript.iter().rev().find(|e| e.speaker == Speaker::Robot)
    }

    fn silence_at(&mut self, t: f64) {
        self.state.no_answer_count += 1;
        if self.state.no_answer_count > self.config.max_no_answer {
            self.end_conversation(t, Cause::NoAnswer);
            return;
        }
        let Some(last) = self.last_robot_entry().cloned() else {
            self.end_conversation(t, Cause::NoAnswer);
            return;
        };
        let mut again = TranscriptEntry::new(t, Speaker::Robot, last.kind, last.text);
        again.engine = last.engine;
        again.similarity = last.similarity;
        again.keyword = last.keyword;
        again.conversation_id = self.state.conversation_id;
        again.repeat = true;
        self.push(again);
        self.state.conversation_utterances += 1;
        self.state.silence_deadline = Some(t + self.config.silence_timeout_s);
    }

    fn end_conversation(&mut self, t: f64, cause: Cause) {
        let id = self.state.conversation_id;
        let turns = self.state.conversation_utterances;
        let mut changed = TranscriptEntry::system(
            t,
            SystemEvent::ModeChanged { from: Mode::Conversing, to: Mode::TvWatching, cause },
            format!("Conversing -> TVWatching ({cause})"),
        );
        changed.conversation_id = id;
        self.push(changed);
        let mut ended = TranscriptEntry::system(
            t,
            SystemEvent::ConversationEnded { turns, cause },
            format!("conversation ended after {turns} turns ({cause})"),
        );
        ended.conversation_id = id;
        self.push(ended);

        self.state.mode = Mode::TvWatching;
        self.state.conversation_turn = 0;
        self.state.conversation_utterances = 0;
        self.state.no_answer_count = 0;
        self.state.silence_deadline = None;
        self.state.conversation_id = None;
        self.topic_keyword = None;
        self.reschedule(t);
    }

    /// Applies one feed event at its own timestamp.
    pub fn ingest_feed(&mut self, event: &FeedEvent) -> Vec<TranscriptEntry> {
        let start = self.state.transcript.len();
        self.advance_to(event.t);
        let t = self.state.clock;
        if event.kind == FeedKind::Caption {
            self.push(TranscriptEntry::system(t, SystemEvent::CaptionShown, event.text.clone()));
        }
        let resources = self.resources.clone();
        let extracted = resources.extractor.ingest(event, &mut self.pool, &self.config.keyword_config());
        for k in extracted.into_iter().filter(|k| k.new) {
            let entry = TranscriptEntry::system(
                t,
                SystemEvent::KeywordExtracted { surface: k.surface.clone(), source: k.source },
                k.surface,
            );
            self.push(entry);
        }
        self.since(start)
    }

    /// Handles something the user said at `now`. Outside conversations it is
    /// only transcribed; empty text counts as silence.
    pub fn on_user_utterance(&mut self, text: &str, now: f64) -> Vec<TranscriptEntry> {
        let start = self.state.transcript.len();
        self.advance_to(now);
        let t = self.state.clock;
        let text = text.trim();
        if text.is_empty() {
            if self.state.mode == Mode::Conversing {
                self.silence_at(t);
            }
            return self.since(start);
        }

        let mut entry = TranscriptEntry::new(t, Speaker::User, EntryKind::User, text);
        entry.conversation_id = self.state.conversation_id;
        self.push(entry);
        if self.state.mode == Mode::TvWatching {
            return self.since(start);
        }

        self.state.no_answer_count = 0;
        self.state.conversation_utterances += 1;
        if self.config.is_end_intent(text) {
            self.end_conversation(t, Cause::EndIntent);
            return self.since(start);
        }

        let context = DialogContext {
            turn_index: self.state.conversation_turn,
            last_robot_utterance: self.last_robot_entry().map(|e| e.text.clone()).unwrap_or_default(),
            last_user_utterance: text.to_string(),
            topic_keyword: self.topic_keyword.clone(),
        };
        let reply = match self.resources.dialog.respond(&context, &self.config.dialog_config()) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("dialog manager failed ({e}); using acknowledgment");
                crate::dialog::ScoredCandidate {
                    reply: crate::dialog::builtin_generative(text, &self.config.acknowledgments),
                    engine: EngineId::Generative,
                    similarity: None,
                    distance: None,
                }
            }
        };
        let mut entry = TranscriptEntry::new(t, Speaker::Robot, EntryKind::Response, reply.reply);
        entry.engine = Some(reply.engine);
        entry.similarity = reply.similarity;
        entry.conversation_id = self.state.conversation_id;
        self.push(entry);
        self.state.conversation_utterances += 1;
        self.state.conversation_turn += 1;
        self.state.silence_deadline = Some(t + self.config.silence_timeout_s);
        self.since(start)
    }

    /// Registers one non-answer at `now` (normally driven by the silence
    /// timer through [`Session::tick`]).
    pub fn on_silence(&mut self, now: f64) -> Vec<TranscriptEntry> {
        let start = self.state.transcript.len();
        self.advance_to(now);
        if self.state.mode == Mode::Conversing {
            let t = self.state.clock;
            self.silence_at(t);
        }
        self.since(start)
    }

    /// Stops the robot: ends any conversation and reschedules the next
    /// utterance. A second cancel with nothing in between changes nothing.
    pub fn cancel(&mut self) -> Vec<TranscriptEntry> {
        if self.cancelled_at_len == Some(self.state.transcript.len()) {
            return Vec::new();
        }
        let start = self.state.transcript.len();
        let t = self.state.clock;
        let mut entry = TranscriptEntry::system(t, SystemEvent::Cancelled, "cancelled");
        entry.conversation_id = self.state.conversation_id;
        self.push(entry);
        match self.state.mode {
            Mode::Conversing => self.end_conversation(t, Cause::Cancel),
            Mode::TvWatching => self.reschedule(t),
        }
        self.cancelled_at_len = Some(self.state.transcript.len());
        self.since(start)
    }
}
