//! Generative replies from an external HTTP model, with the built-in
//! acknowledgments as fallback.

use std::time::Duration;

use companion_core::{builtin_generative, DialogConfig, DialogContext, GenerativeEngine};
use serde::Deserialize;
use serde_json::json;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);

/// POSTs the dialog context as JSON to `url` and expects `{"reply": "..."}`.
/// Any failure (timeout, status, malformed or empty body) falls back to the
/// built-in generator so a conversation never stalls.
pub struct HttpGenerative {
    url: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ReplyBody {
    reply: String,
}

impl HttpGenerative {
    pub fn new(url: impl Into<String>, timeout: Duration) -> reqwest::Result<Self> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build()?;
        Ok(HttpGenerative { url: url.into(), client })
    }

    fn fetch(&self, context: &DialogContext) -> Result<String, String> {
        let body = json!({
            "turn_index": context.turn_index,
            "last_robot_utterance": context.last_robot_utterance,
            "last_user_utterance": context.last_user_utterance,
            "topic_keyword": context.topic_keyword,
        });
        let response = self.client.post(&self.url).json(&body).send().map_err(|e| e.to_string())?;
        let response = response.error_for_status().map_err(|e| e.to_string())?;
        let parsed: ReplyBody = response.json().map_err(|e| e.to_string())?;
        let reply = parsed.reply.trim();
        if reply.is_empty() {
            return Err("empty reply".into());
        }
        Ok(reply.to_string())
    }
}

impl GenerativeEngine for HttpGenerative {
    fn reply(&self, context: &DialogContext, config: &DialogConfig) -> String {
        self.fetch(context).unwrap_or_else(|e| {
            log::warn!("generative endpoint {} failed, using built-in reply: {e}", self.url);
            builtin_generative(&context.last_user_utterance, &config.acknowledgments)
        })
    }
}
