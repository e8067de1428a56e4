//! Shared, immutable inputs of a session: vectors, keyword extraction,
//! templates and dialog engines.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::dialog::{load_corpus, BuiltinGenerative, DialogEngine, DialogManager, EngineId, RetrievalEngine};
use crate::embeddings::{load_vectors, EmbeddingStore};
use crate::keywords::{read_word_list_file, DefaultTokenizer, KeywordExtractor, Tokenizer};
use crate::templates::{load_templates, TemplateConfig, TemplateCorpus};

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Vectors { path: PathBuf, source: crate::embeddings::EmbeddingError },
    #[error("{path}: {source}")]
    Templates { path: PathBuf, source: crate::templates::TemplateError },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: crate::dialog::CorpusError },
}

/// File locations for [`Resources::load`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResourcePaths {
    pub vectors: PathBuf,
    pub templates: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub user_dictionary: Option<PathBuf>,
    pub tv_program: PathBuf,
    pub daily_life: PathBuf,
    pub news_sns: PathBuf,
}

impl ResourcePaths {
    /// The bundled layout: `vectors.txt`, `templates.tsv`, `stopwords.txt`,
    /// `userdict.txt` and `corpora/<engine>.jsonl` under `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let optional = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        ResourcePaths {
            vectors: dir.join("vectors.txt"),
            templates: dir.join("templates.tsv"),
            stopwords: optional("stopwords.txt"),
            user_dictionary: optional("userdict.txt"),
            tv_program: dir.join("corpora/tv_program.jsonl"),
            daily_life: dir.join("corpora/daily_life.jsonl"),
            news_sns: dir.join("corpora/news_sns.jsonl"),
        }
    }
}

pub struct Resources {
    pub store: Arc<EmbeddingStore>,
    pub tokenizer: Arc<dyn Tokenizer>,
    pub extractor: KeywordExtractor,
    pub templates: TemplateCorpus,
    pub dialog: DialogManager,
    /// Non-fatal problems found while loading.
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for Resources {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resources")
            .field("vocab", &self.store.vocab_size())
            .field("templates", &self.templates.templates().len())
            .field("dialog", &self.dialog)
            .finish()
    }
}

fn open(path: &Path) -> Result<BufReader<File>, ResourceError> {
    File::open(path).map(BufReader::new).map_err(|source| ResourceError::Io { path: path.to_path_buf(), source })
}

impl Resources {
    pub fn load(paths: &ResourcePaths, template_config: &TemplateConfig) -> Result<Self, ResourceError> {
        let mut warnings = Vec::new();
        let loaded = load_vectors(open(&paths.vectors)?)
            .map_err(|source| ResourceError::Vectors { path: paths.vectors.clone(), source })?;
        warnings.extend(loaded.warnings);
        let store = Arc::new(loaded.store);

        let word_list = |p: &Option<PathBuf>| -> Result<Vec<String>, ResourceError> {
            match p {
                Some(p) => read_word_list_file(p).map_err(|source| ResourceError::Io { path: p.clone(), source }),
                None => Ok(Vec::new()),
            }
        };
        let stopwords = word_list(&paths.stopwords)?;
        let dictionary = word_list(&paths.user_dictionary)?;
        let tokenizer: Arc<dyn Tokenizer> = Arc::new(DefaultTokenizer::with_dictionary(dictionary));

        let templates = load_templates(open(&paths.templates)?, &store, template_config)
            .map_err(|source| ResourceError::Templates { path: paths.templates.clone(), source })?;
        warnings.extend(templates.warnings);

        let mut engines: Vec<Box<dyn DialogEngine>> = Vec::new();
        for (id, path) in [
            (EngineId::TvProgram, &paths.tv_program),
            (EngineId::DailyLife, &paths.daily_life),
            (EngineId::NewsSns, &paths.news_sns),
        ] {
            let records =
                load_corpus(open(path)?).map_err(|source| ResourceError::Corpus { path: path.clone(), source })?;
            engines.push(Box::new(RetrievalEngine::new(id, records)));
        }

        Ok(Self::from_parts(store, tokenizer, stopwords, templates.corpus, engines, warnings))
    }

    /// Assembles resources from in-memory parts with the built-in generative
    /// engine.
    pub fn from_parts(
        store: Arc<EmbeddingStore>,
        tokenizer: Arc<dyn Tokenizer>,
        stopwords: Vec<String>,
        templates: TemplateCorpus,
        engines: Vec<Box<dyn DialogEngine>>,
        warnings: Vec<String>,
    ) -> Self {
        let extractor = KeywordExtractor::new(tokenizer.clone(), stopwords, store.clone());
        let dialog = DialogManager::new(engines, Box::new(BuiltinGenerative), tokenizer.clone(), store.clone());
        Resources { store, tokenizer, extractor, templates, dialog, warnings }
    }
}
