//! Scripted, deterministic session runs.
//!
//! A scenario pairs a feed file with a user script. Script steps are consumed
//! in order; each waits for its trigger (the next conversation-opening
//! question, the next robot utterance inside a conversation, or a fixed time)
//! and then says its text after `delay_s`, or stays silent.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keywords::{read_feed, FeedError, FeedEvent};
use crate::resources::{ResourceError, ResourcePaths, Resources};
use crate::session::{ConfigError, EntryKind, Session, SessionConfig, Speaker, SystemEvent, TranscriptEntry};
use crate::templates::TemplateConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// The next question that opens a conversation.
    AfterRobotQuestion,
    /// The next robot utterance inside a conversation (response or repeat).
    AfterRobotReply,
    /// Absolute time `at`.
    AtTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub trigger: Trigger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    /// What the user says; absent means the user stays silent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub say: Option<String>,
    #[serde(default)]
    pub delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Feed file, relative to the scenario file.
    pub feed: PathBuf,
    /// Resource directory, relative to the scenario file.
    #[serde(default = "default_resources")]
    pub resources: PathBuf,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub user_script: Vec<ScriptStep>,
}

fn default_resources() -> PathBuf {
    PathBuf::from("..")
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario {path}: {source}")]
    Scenario { path: PathBuf, source: serde_json::Error },
    #[error("invalid config override: {0}")]
    ConfigOverride(serde_json::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("feed {path}: {source}")]
    Feed { path: PathBuf, source: FeedError },
    #[error(transparent)]
    Resources(#[from] ResourceError),
    #[error("script step {index}: {reason}")]
    Script { index: usize, reason: String },
    #[error("duration_s must be finite and non-negative")]
    Duration,
}

/// Applies JSON overrides on top of the default config.
pub fn config_with_overrides(
    overrides: &serde_json::Map<String, serde_json::Value>,
) -> Result<SessionConfig, SimError> {
    let mut base = serde_json::to_value(SessionConfig::default()).expect("config serializes");
    let obj = base.as_object_mut().expect("config is an object");
    for (k, v) in overrides {
        obj.insert(k.clone(), v.clone());
    }
    let config: SessionConfig = serde_json::from_value(base).map_err(SimError::ConfigOverride)?;
    config.validate()?;
    Ok(config)
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| SimError::Scenario { path: path.into(), source })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(SimError::Duration);
        }
        for (index, step) in self.user_script.iter().enumerate() {
            let fail = |reason: &str| Err(SimError::Script { index, reason: reason.into() });
            if !(step.delay_s.is_finite() && step.delay_s >= 0.0) {
                return fail("delay_s must be non-negative");
            }
            match (step.trigger, step.at) {
                (Trigger::AtTime, None) => return fail("at_time needs `at`"),
                (Trigger::AtTime, Some(t)) if !(t.is_finite() && t >= 0.0) => return fail("`at` must be non-negative"),
                _ => {}
            }
        }
        Ok(())
    }

    /// Session config: defaults, then `config` overrides, then `seed`.
    pub fn session_config(&self) -> Result<SessionConfig, SimError> {
        let mut config = config_with_overrides(&self.config)?;
        config.rng_seed = self.seed;
        Ok(config)
    }
}

/// A scenario with its feed and resources loaded.
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub feed: Vec<FeedEvent>,
    pub resources: Arc<Resources>,
}

impl PreparedScenario {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let scenario = Scenario::from_file(path)?;
        scenario.validate()?;
        let base = path.parent().unwrap_or(Path::new("."));
        let feed_path = base.join(&scenario.feed);
        let file =
            std::fs::File::open(&feed_path).map_err(|source| SimError::Io { path: feed_path.clone(), source })?;
        let feed = read_feed(std::io::BufReader::new(file))
            .map_err(|source| SimError::Feed { path: feed_path.clone(), source })?;
        let resources =
            Resources::load(&ResourcePaths::in_dir(base.join(&scenario.resources)), &TemplateConfig::default())?;
        Ok(PreparedScenario { scenario, feed, resources: Arc::new(resources) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub conversations: usize,
    /// Robot+user utterances per conversation, in order.
    pub turns: Vec<u32>,
    pub robot_utterances: usize,
    pub user_utterances: usize,
    pub keyword_usage: BTreeMap<String, u32>,
}

impl Summary {
    pub fn from_transcript(transcript: &[TranscriptEntry]) -> Self {
        let mut turns = Vec::new();
        let mut keyword_usage = BTreeMap::new();
        for e in transcript {
            if let Some(SystemEvent::ConversationEnded { turns: n, .. }) = e.event {
                turns.push(n);
            }
            if let (Some(k), false) = (&e.keyword, e.repeat) {
                *keyword_usage.entry(k.clone()).or_insert(0) += 1;
            }
        }
        Summary {
            conversations: turns.len(),
            turns,
            robot_utterances: transcript.iter().filter(|e| e.speaker == Speaker::Robot).count(),
            user_utterances: transcript.iter().filter(|e| e.speaker == Speaker::User).count(),
            keyword_usage,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub transcript: Vec<TranscriptEntry>,
    pub summary: Summary,
}

fn matches(trigger: Trigger, entry: &TranscriptEntry) -> bool {
    if entry.speaker != Speaker::Robot || entry.conversation_id.is_none() {
        return false;
    }
    let opening = entry.kind == EntryKind::Question && !entry.repeat;
    match trigger {
        Trigger::AfterRobotQuestion => opening,
        Trigger::AfterRobotReply => !opening,
        Trigger::AtTime => false,
    }
}

/// Runs `scenario` against `feed` until `duration_s`. Ties at the same
/// instant are processed as: user utterance, then feed event, then timers.
pub fn simulate(
    scenario: &Scenario,
    feed: &[FeedEvent],
    resources: Arc<Resources>,
) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let mut session = Session::new(resources, scenario.session_config()?)?;
    let end = scenario.duration_s;
    let steps = &scenario.user_script;
    let mut step = 0usize;
    let mut feed_idx = 0usize;
    // (time, text) of the next scripted user action.
    let mut pending: Option<(f64, Option<String>)> = None;

    loop {
        if pending.is_none() {
            if let Some(s) = steps.get(step).filter(|s| s.trigger == Trigger::AtTime) {
                pending = Some((s.at.unwrap_or(0.0) + s.delay_s, s.say.clone()));
                step += 1;
            }
        }
        let user_t = pending.as_ref().map_or(f64::INFINITY, |p| p.0);
        let feed_t = feed.get(feed_idx).map_or(f64::INFINITY, |e| e.t);
        let timer_t = session.next_timer();
        let t = user_t.min(feed_t).min(timer_t);
        if t > end || !t.is_finite() {
            break;
        }

        let emitted = if user_t == t {
            let (_, say) = pending.take().expect("user time implies pending");
            match say {
                Some(text) => session.on_user_utterance(&text, t),
                None => session.tick(t),
            }
        } else if feed_t == t {
            feed_idx += 1;
            session.ingest_feed(&feed[feed_idx - 1])
        } else {
            session.tick(t)
        };

        for entry in &emitted {
            if pending.is_some() {
                break;
            }
            let Some(s) = steps.get(step) else { break };
            if matches(s.trigger, entry) {
                step += 1;
                if let Some(text) = &s.say {
                    pending = Some((entry.t + s.delay_s, Some(text.clone())));
                }
            }
        }
    }
    session.tick(end);

    let transcript = session.transcript().to_vec();
    let summary = Summary::from_transcript(&transcript);
    Ok(SimulationResult { transcript, summary })
}

/// Writes entries as JSON lines.
pub fn write_transcript<W: Write>(entries: &[TranscriptEntry], mut out: W) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
