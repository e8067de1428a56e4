//! Brain of a TV-watching companion robot, text only.
//!
//! The pipeline: feed events (captions, object-detection labels) become
//! keywords; keywords fill slotted templates chosen by cosine similarity;
//! a two-mode session speaks at Poisson-process times and, after a question,
//! holds a conversation whose replies are retrieved across turn-unlocked
//! engines by Word Mover's Distance.

pub mod dialog;
pub mod embeddings;
pub mod keywords;
pub mod resources;
pub mod session;
pub mod sim;
pub mod stats;
pub mod templates;
mod transport;
pub mod wmd;

pub use dialog::{
    available_engines, builtin_generative, BuiltinGenerative, Candidate, DialogConfig, DialogContext, DialogEngine,
    DialogManager, EngineId, GenerativeEngine, RetrievalEngine, ScoredCandidate,
};
pub use embeddings::{cosine_similarity, load_vectors, synthetic_store, EmbeddingStore};
pub use keywords::{tokenize_default, DefaultTokenizer, FeedEvent, FeedKind, Keyword, KeywordPool, Tokenizer};
pub use resources::{ResourcePaths, Resources};
pub use session::{
    schedule_next, Cause, EntryKind, Mode, Session, SessionConfig, SessionState, Speaker, SystemEvent, TranscriptEntry,
};
pub use sim::{simulate, write_transcript, PreparedScenario, Scenario, ScriptStep, SimulationResult, Summary, Trigger};
pub use stats::{format_table, read_transcript, TurnStats};
pub use templates::{load_templates, realize, select_template, TemplateCorpus, TemplateKind, UtteranceTemplate};
pub use wmd::{nbow, relaxed_wmd, to_similarity, wmd, TransportPlan, WeightedDoc};
