//! Slotted utterance templates: loading, cosine-similarity selection and slot
//! filling.
//!
//! A template file is UTF-8, tab separated, one `kind<TAB>anchor<TAB>pattern`
//! record per line; lines starting with `#` are comments. The pattern holds
//! exactly one `***` slot.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::EngineId;
use crate::embeddings::{cosine_similarity, EmbeddingStore};

pub const SLOT: &str = "***";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Disclosure,
    Question,
}

impl TemplateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateKind::Disclosure => "disclosure",
            TemplateKind::Question => "question",
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "disclosure" => Ok(TemplateKind::Disclosure),
            "question" => Ok(TemplateKind::Question),
            other => Err(format!("unknown template kind {other:?}")),
        }
    }
}

/// Id 0 is reserved for the built-in fallback templates; file records are
/// numbered from 1 in load order.
pub const DEFAULT_TEMPLATE_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceTemplate {
    pub id: u32,
    pub kind: TemplateKind,
    pub anchor: String,
    pub pattern: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceKind {
    Disclosure,
    Question,
    Response,
}

impl From<TemplateKind> for UtteranceKind {
    fn from(k: TemplateKind) -> Self {
        match k {
            TemplateKind::Disclosure => UtteranceKind::Disclosure,
            TemplateKind::Question => UtteranceKind::Question,
        }
    }
}

/// A realized robot utterance. `engine` is set exactly when `kind` is
/// `Response`.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub text: String,
    pub kind: UtteranceKind,
    pub keyword: Option<String>,
    pub produced_at: f64,
    pub engine: Option<EngineId>,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("no valid template records ({rejected} rejected)")]
    NoValidRecords { rejected: usize },
    #[error("corpus has no {0} templates")]
    EmptyKind(TemplateKind),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct TemplateConfig {
    pub max_template_chars: usize,
    pub default_disclosure: String,
    pub default_question: String,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            max_template_chars: 20,
            default_disclosure: "I am curious about ***".into(),
            default_question: "What do you think about ***".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TemplateCorpus {
    templates: Vec<UtteranceTemplate>,
    default_disclosure: UtteranceTemplate,
    default_question: UtteranceTemplate,
}

/// Result of [`load_templates`]: the corpus plus one warning per rejected line.
#[derive(Debug)]
pub struct LoadedTemplates {
    pub corpus: TemplateCorpus,
    pub warnings: Vec<String>,
    pub rejected: usize,
}

fn check_record(
    kind: &str,
    anchor: &str,
    pattern: &str,
    store: &EmbeddingStore,
    config: &TemplateConfig,
) -> Result<TemplateKind, String> {
    let kind: TemplateKind = kind.parse()?;
    let slots = pattern.matches(SLOT).count();
    if slots != 1 {
        return Err(format!("pattern must contain exactly one {SLOT} slot, found {slots}"));
    }
    let len = pattern.replacen(SLOT, "", 1).chars().count();
    if len > config.max_template_chars {
        return Err(format!("pattern is {len} characters without the slot, limit is {}", config.max_template_chars));
    }
    if !store.contains(anchor) {
        return Err(format!("anchor {anchor:?} has no word vector"));
    }
    Ok(kind)
}

/// Loads a template file. Invalid records are skipped with a warning; at
/// least one valid record is required.
pub fn load_templates<R: BufRead>(
    source: R,
    store: &EmbeddingStore,
    config: &TemplateConfig,
) -> Result<LoadedTemplates, TemplateError> {
    let mut templates = Vec::new();
    let mut warnings = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let outcome = match fields.as_slice() {
            [kind, anchor, pattern] => {
                check_record(kind, anchor, pattern, store, config).map(|k| (k, *anchor, *pattern))
            }
            _ => Err(format!("expected 3 tab-separated fields, found {}", fields.len())),
        };
        match outcome {
            Ok((kind, anchor, pattern)) => templates.push(UtteranceTemplate {
                id: templates.len() as u32 + 1,
                kind,
                anchor: anchor.to_string(),
                pattern: pattern.to_string(),
            }),
            Err(reason) => {
                let msg = format!("template line {}: {reason}", n + 1);
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    let rejected = warnings.len();
    if templates.is_empty() {
        return Err(TemplateError::NoValidRecords { rejected });
    }
    Ok(LoadedTemplates { corpus: TemplateCorpus::new(templates, config), warnings, rejected })
}

impl TemplateCorpus {
    pub fn new(templates: Vec<UtteranceTemplate>, config: &TemplateConfig) -> Self {
        let fallback = |kind, pattern: &str| UtteranceTemplate {
            id: DEFAULT_TEMPLATE_ID,
            kind,
            anchor: String::new(),
            pattern: pattern.to_string(),
        };
        TemplateCorpus {
            templates,
            default_disclosure: fallback(TemplateKind::Disclosure, &config.default_disclosure),
            default_question: fallback(TemplateKind::Question, &config.default_question),
        }
    }

    pub fn templates(&self) -> &[UtteranceTemplate] {
        &self.templates
    }

    pub fn get(&self, id: u32) -> Option<&UtteranceTemplate> {
        match id {
            DEFAULT_TEMPLATE_ID => None,
            _ => self.templates.iter().find(|t| t.id == id),
        }
    }

    pub fn default_for(&self, kind: TemplateKind) -> &UtteranceTemplate {
        match kind {
            TemplateKind::Disclosure => &self.default_disclosure,
            TemplateKind::Question => &self.default_question,
        }
    }

    /// Writes the accepted records back out in file format.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.templates {
            writeln!(out, "{}\t{}\t{}", t.kind, t.anchor, t.pattern)?;
        }
        Ok(())
    }

    /// The template of `kind` whose anchor is most cosine-similar to
    /// `keyword`; ties go to the lowest id. Keywords without a usable vector
    /// get the fallback template for `kind`.
    pub fn select(
        &self,
        keyword: &str,
        kind: TemplateKind,
        store: &EmbeddingStore,
    ) -> Result<&UtteranceTemplate, TemplateError> {
        let mut candidates = self.templates.iter().filter(|t| t.kind == kind).peekable();
        if candidates.peek().is_none() {
            return Err(TemplateError::EmptyKind(kind));
        }
        if !store.contains(keyword) {
            return Ok(self.default_for(kind));
        }
        let mut best: Option<(&UtteranceTemplate, f64)> = None;
        for t in candidates {
            let Ok(score) = cosine_similarity(keyword, &t.anchor, store) else {
                continue;
            };
            let better = match best {
                None => true,
                Some((b, s)) => score > s || (score == s && t.id < b.id),
            };
            if better {
                best = Some((t, score));
            }
        }
        Ok(best.map(|(t, _)| t).unwrap_or_else(|| self.default_for(kind)))
    }
}

/// Convenience form of [`TemplateCorpus::select`].
pub fn select_template<'c>(
    keyword: &str,
    kind: TemplateKind,
    corpus: &'c TemplateCorpus,
    store: &EmbeddingStore,
) -> Result<&'c UtteranceTemplate, TemplateError> {
    corpus.select(keyword, kind, store)
}

/// Fills the slot with `keyword` verbatim (single pass) and makes sure
/// questions end with a question mark.
pub fn realize(template: &UtteranceTemplate, keyword: &str, produced_at: f64) -> Utterance {
    let mut text = template.pattern.replacen(SLOT, keyword, 1);
    if template.kind == TemplateKind::Question && !text.trim_end().ends_with('?') {
        text.truncate(text.trim_end().len());
        text.push('?');
    }
    Utterance { text, kind: template.kind.into(), keyword: Some(keyword.to_string()), produced_at, engine: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingStore;
    use proptest::prelude::*;

    fn store() -> EmbeddingStore {
        EmbeddingStore::from_entries(
            3,
            [
                ("elephant".to_string(), vec![1.0, 0.1, 0.0]),
                ("like".to_string(), vec![0.9, 0.3, 0.1]),
                ("eat".to_string(), vec![0.0, 1.0, 0.2]),
                ("go".to_string(), vec![0.1, 0.0, 1.0]),
            ],
        )
        .unwrap()
        .0
    }

    fn corpus(text: &str) -> LoadedTemplates {
        load_templates(text.as_bytes(), &store(), &TemplateConfig::default()).unwrap()
    }

    #[test]
    fn loads_bundled_style_templates() {
        let loaded = corpus("disclosure\teat\tI want to eat ***\nquestion\tlike\tDo you like ***\n");
        let ts = loaded.corpus.templates();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].kind, TemplateKind::Disclosure);
        assert_eq!(ts[0].pattern, "I want to eat ***");
        assert_eq!(ts[1].kind, TemplateKind::Question);
        assert_eq!(loaded.rejected, 0);
    }

    #[test]
    fn rejects_bad_records() {
        let loaded = corpus(concat!(
            "# comment\n",
            "disclosure\teat\t*** and ***\n",
            "disclosure\teat\tI want to eat\n",
            "disclosure\teat\tI would really love to eat ***\n",
            "disclosure\tzzz\tI want ***\n",
            "musing\teat\tHm ***\n",
            "disclosure\teat\n",
            "question\tlike\tDo you like ***\n",
        ));
        assert_eq!(loaded.corpus.templates().len(), 1);
        assert_eq!(loaded.rejected, 6);
        assert_eq!(loaded.warnings.len(), 6);
        assert!(loaded.warnings[0].contains("line 2"));
        assert!(matches!(
            load_templates("disclosure\teat\t*** ***\n".as_bytes(), &store(), &TemplateConfig::default()),
            Err(TemplateError::NoValidRecords { rejected: 1 })
        ));
    }

    #[test]
    fn length_limit_excludes_slot() {
        assert_eq!("I am really curious: ".chars().count(), 21);
        assert_eq!("I am really curious ".chars().count(), 20);
        let loaded = load_templates(
            "disclosure\tlike\tI am really curious ***\ndisclosure\tlike\tI am really curious: ***\n".as_bytes(),
            &store(),
            &TemplateConfig::default(),
        )
        .unwrap();
        assert_eq!(loaded.corpus.templates().len(), 1);
        assert_eq!(loaded.corpus.templates()[0].pattern, "I am really curious ***");
        assert_eq!(loaded.rejected, 1);
    }

    #[test]
    fn selects_by_anchor_similarity() {
        let s = store();
        let loaded = corpus("question\teat\tDo you want to eat ***\nquestion\tlike\tDo you like ***\nquestion\tgo\tShall we go to ***\n");
        let t = loaded.corpus.select("elephant", TemplateKind::Question, &s).unwrap();
        assert_eq!(t.pattern, "Do you like ***");
        assert_eq!(realize(t, "elephant", 0.0).text, "Do you like elephant?");
    }

    #[test]
    fn selection_edge_cases() {
        let s = store();
        let single = corpus("disclosure\tgo\tI want to go ***\n");
        assert_eq!(single.corpus.select("elephant", TemplateKind::Disclosure, &s).unwrap().id, 1);
        assert!(matches!(
            single.corpus.select("elephant", TemplateKind::Question, &s),
            Err(TemplateError::EmptyKind(TemplateKind::Question))
        ));
        // OOV keyword falls back to the default.
        let t = single.corpus.select("hippo", TemplateKind::Disclosure, &s).unwrap();
        assert_eq!(t.id, DEFAULT_TEMPLATE_ID);
        assert_eq!(realize(t, "hippo", 0.0).text, "I am curious about hippo");

        let twins = corpus("disclosure\tlike\tI like ***\ndisclosure\tlike\tI love ***\n");
        // Oracle: full scan with (score desc, id asc).
        let mut scored: Vec<(f64, u32)> = twins
            .corpus
            .templates()
            .iter()
            .map(|t| (cosine_similarity("elephant", &t.anchor, &s).unwrap(), t.id))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        assert_eq!(twins.corpus.select("elephant", TemplateKind::Disclosure, &s).unwrap().id, scored[0].1);
        assert_eq!(scored[0].1, 1);
    }

    #[test]
    fn realize_rules() {
        let like = UtteranceTemplate {
            id: 1,
            kind: TemplateKind::Disclosure,
            anchor: "like".into(),
            pattern: "I like ***".into(),
        };
        let u = realize(&like, "elephant", 3.0);
        assert_eq!(u.text, "I like elephant");
        assert_eq!(u.kind, UtteranceKind::Disclosure);
        assert_eq!(u.engine, None);
        let q = UtteranceTemplate {
            id: 2,
            kind: TemplateKind::Question,
            anchor: "like".into(),
            pattern: "Do you like ***?".into(),
        };
        assert_eq!(realize(&q, "elephant", 0.0).text, "Do you like elephant?");
        assert_eq!(realize(&like, "a***b", 0.0).text, "I like a***b");
    }

    #[test]
    fn writes_back_accepted_records() {
        let text = "disclosure\teat\tI want to eat ***\nquestion\tlike\tDo you like ***\n";
        let loaded = corpus(&format!("# header\n{text}question\tlike\t*** ***\n"));
        let mut out = Vec::new();
        loaded.corpus.write_to(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    proptest! {
        #[test]
        fn realized_text_has_no_slot(kw in "[a-z ]{1,12}", question in any::<bool>()) {
            let kind = if question { TemplateKind::Question } else { TemplateKind::Disclosure };
            let t = UtteranceTemplate { id: 1, kind, anchor: "like".into(), pattern: "So *** it is".into() };
            prop_assert!(!realize(&t, &kw, 0.0).text.contains(SLOT));
        }

        #[test]
        fn selection_ignores_corpus_order(order in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
            let s = store();
            let records = [
                (TemplateKind::Question, "eat", "Do you eat ***"),
                (TemplateKind::Question, "like", "Do you like ***"),
                (TemplateKind::Question, "go", "Going to ***"),
                (TemplateKind::Question, "like", "You like ***"),
                (TemplateKind::Disclosure, "like", "I like ***"),
            ];
            let build = |idx: &[usize]| {
                let ts = idx.iter().map(|&i| UtteranceTemplate {
                    id: i as u32 + 1,
                    kind: records[i].0,
                    anchor: records[i].1.into(),
                    pattern: records[i].2.into(),
                }).collect();
                TemplateCorpus::new(ts, &TemplateConfig::default())
            };
            let base = build(&[0, 1, 2, 3, 4]);
            let shuffled = build(&order);
            for kw in ["elephant", "eat", "go", "like"] {
                prop_assert_eq!(
                    base.select(kw, TemplateKind::Question, &s).unwrap().id,
                    shuffled.select(kw, TemplateKind::Question, &s).unwrap().id
                );
            }
        }
    }
}
