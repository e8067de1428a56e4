//! Turn statistics over transcript files.
//!
//! A conversation is the set of entries sharing a `conversation_id`; its turn
//! count is the number of robot and user utterances in it. A robot-only count
//! is reported alongside for comparison with figures that count one speaker.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::Serialize;

use crate::session::{Speaker, TranscriptEntry};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnStats {
    /// Turns per conversation, ordered by conversation id.
    pub turns: Vec<u32>,
    pub robot_turns: Vec<u32>,
    pub conversation_count: usize,
    pub mean: Option<f64>,
    pub max: Option<u32>,
    pub robot_mean: Option<f64>,
    pub robot_max: Option<u32>,
}

/// A transcript line that could not be parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

fn mean(xs: &[u32]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().map(|&x| f64::from(x)).sum::<f64>() / xs.len() as f64)
}

impl TurnStats {
    pub fn from_entries<'a, I: IntoIterator<Item = &'a TranscriptEntry>>(entries: I) -> Self {
        let mut per: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
        for e in entries {
            let Some(id) = e.conversation_id else { continue };
            let counts = per.entry(id).or_default();
            match e.speaker {
                Speaker::Robot => {
                    counts.0 += 1;
                    counts.1 += 1;
                }
                Speaker::User => counts.0 += 1,
                Speaker::System => {}
            }
        }
        let turns: Vec<u32> = per.values().map(|c| c.0).collect();
        let robot_turns: Vec<u32> = per.values().map(|c| c.1).collect();
        TurnStats {
            conversation_count: turns.len(),
            mean: mean(&turns),
            max: turns.iter().copied().max(),
            robot_mean: mean(&robot_turns),
            robot_max: robot_turns.iter().copied().max(),
            turns,
            robot_turns,
        }
    }
}

/// Parses a JSON-lines transcript, skipping (and reporting) bad lines.
pub fn read_transcript<R: BufRead>(source: R) -> std::io::Result<(Vec<TranscriptEntry>, Vec<LineError>)> {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(e) => entries.push(e),
            Err(e) => errors.push(LineError { line: n + 1, message: e.to_string() }),
        }
    }
    Ok((entries, errors))
}

fn fmt_mean(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |m| format!("{m:.2}"))
}

fn fmt_max(x: Option<u32>) -> String {
    x.map_or_else(|| "-".to_string(), |m| m.to_string())
}

/// Renders one column per group with `Average` and `Maximum` rows, plus the
/// robot-only variants and conversation counts.
pub fn format_table(groups: &[(String, TurnStats)]) -> String {
    type Cell = fn(&TurnStats) -> String;
    let rows: [(&str, Cell); 5] = [
        ("Average", |s| fmt_mean(s.mean)),
        ("Maximum", |s| fmt_max(s.max)),
        ("Average (robot)", |s| fmt_mean(s.robot_mean)),
        ("Maximum (robot)", |s| fmt_max(s.robot_max)),
        ("Conversations", |s| s.conversation_count.to_string()),
    ];
    let label_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let widths: Vec<usize> = groups
        .iter()
        .map(|(name, s)| rows.iter().map(|r| r.1(s).len()).chain([name.len()]).max().unwrap_or(1))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for ((name, _), w) in groups.iter().zip(&widths) {
        let _ = write!(out, "  {name:>w$}");
    }
    out.push('\n');
    for (label, cell) in &rows {
        let _ = write!(out, "{label:label_w$}");
        for ((_, s), w) in groups.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", cell(s));
        }
        out.push('\n');
    }
    out
}
