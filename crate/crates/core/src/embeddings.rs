//! Word vectors: loading, lookup, cosine similarity and seeded synthetic stores.
//!
//! The on-disk format is the plain-text interchange layout used by most
//! word2vec tooling: a `<count> <dimension>` header followed by one
//! `<word> <x1> ... <xd>` row per word, single-space separated.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: component {index} is not a finite number")]
    NonFinite { line: usize, index: usize },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("word not in vocabulary: {0}")]
    OutOfVocabulary(String),
    #[error("vector for {0:?} has zero norm")]
    ZeroNorm(String),
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable word → vector map. Vectors are stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    words: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

/// A loaded store plus the non-fatal problems found while reading it.
#[derive(Debug)]
pub struct LoadedVectors {
    pub store: EmbeddingStore,
    pub warnings: Vec<String>,
}

impl EmbeddingStore {
    /// Builds a store from `(word, vector)` pairs. Duplicate words keep the
    /// first vector; the returned list names every dropped duplicate.
    pub fn from_entries<I>(dimension: usize, entries: I) -> Result<(Self, Vec<String>), EmbeddingError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        if dimension == 0 {
            return Err(EmbeddingError::InvalidDimension(dimension));
        }
        let mut store = EmbeddingStore { dimension, words: Vec::new(), data: Vec::new(), index: HashMap::new() };
        let mut duplicates = Vec::new();
        for (n, (word, vector)) in entries.into_iter().enumerate() {
            if vector.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    line: n + 1,
                    expected: dimension,
                    found: vector.len(),
                });
            }
            if let Some(index) = vector.iter().position(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite { line: n + 1, index });
            }
            if store.index.contains_key(&word) {
                duplicates.push(word);
                continue;
            }
            store.index.insert(word.clone(), store.words.len());
            store.words.push(word);
            store.data.extend_from_slice(&vector);
        }
        if store.words.is_empty() {
            return Err(EmbeddingError::EmptyVocabulary);
        }
        Ok((store, duplicates))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    /// Words in load order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Euclidean distance between two in-vocabulary words.
    pub fn distance(&self, a: &str, b: &str) -> Result<f64, EmbeddingError> {
        let va = self.lookup(a)?;
        let vb = self.lookup(b)?;
        Ok(euclidean(va, vb))
    }

    fn lookup(&self, word: &str) -> Result<&[f64], EmbeddingError> {
        self.get(word).ok_or_else(|| EmbeddingError::OutOfVocabulary(word.to_string()))
    }

    /// Writes the store in the text format accepted by [`load_vectors`].
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.vocab_size(), self.dimension)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(out, "{word}")?;
            for x in self.row(i) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Parses the text vector format. LF and CRLF line endings are both accepted;
/// blank lines are skipped. A header count that disagrees with the number of
/// rows only produces a warning.
pub fn load_vectors<R: BufRead>(source: R) -> Result<LoadedVectors, EmbeddingError> {
    let mut lines = source.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                let line = line.trim_end_matches('\r');
                if !line.trim().is_empty() {
                    break line.to_string();
                }
            }
            None => return Err(EmbeddingError::MalformedHeader("missing header".into())),
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dimension) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(EmbeddingError::MalformedHeader(header.clone())),
        },
        _ => return Err(EmbeddingError::MalformedHeader(header.clone())),
    };

    let mut rows = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(' ').filter(|p| !p.is_empty()).collect();
        if parts.len() < 2 {
            return Err(EmbeddingError::DimensionMismatch {
                line: line_no,
                expected: dimension,
                found: parts.len().saturating_sub(1),
            });
        }
        // Multiword surfaces ("ice cream") are allowed: the word is everything
        // before the last `dimension` fields, provided none of it is numeric.
        let split = parts.len().saturating_sub(dimension).max(1);
        if parts[1..split].iter().any(|p| p.parse::<f64>().is_ok()) || parts.len() - 1 < dimension {
            return Err(EmbeddingError::DimensionMismatch {
                line: line_no,
                expected: dimension,
                found: parts.len() - 1,
            });
        }
        let word = parts[..split].join(" ");
        let mut vector = Vec::with_capacity(dimension);
        for (index, raw) in parts[split..].iter().enumerate() {
            let x: f64 = raw.parse().map_err(|_| EmbeddingError::MalformedRow {
                line: line_no,
                reason: format!("cannot parse component {index}: {raw:?}"),
            })?;
            if !x.is_finite() {
                return Err(EmbeddingError::NonFinite { line: line_no, index });
            }
            vector.push(x);
        }
        rows.push((word, vector));
    }

    let row_count = rows.len();
    let (store, duplicates) = EmbeddingStore::from_entries(dimension, rows)?;
    let mut warnings: Vec<String> =
        duplicates.into_iter().map(|w| format!("duplicate word {w:?}: keeping first vector")).collect();
    if row_count != count {
        warnings.push(format!("header declares {count} rows, found {row_count}"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(LoadedVectors { store, warnings })
}

/// Cosine similarity between two in-vocabulary words.
pub fn cosine_similarity(a: &str, b: &str, store: &EmbeddingStore) -> Result<f64, EmbeddingError> {
    let va = store.lookup(a)?;
    let vb = store.lookup(b)?;
    let na = norm(va);
    if na == 0.0 {
        return Err(EmbeddingError::ZeroNorm(a.to_string()));
    }
    let nb = norm(vb);
    if nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm(b.to_string()));
    }
    // Summation order does not depend on argument order, so the result is
    // exactly symmetric.
    let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Deterministic unit-norm vectors for `words`, derived from `(seed, word)`.
/// Repeated words keep their first vector.
pub fn synthetic_store(seed: u64, words: &[&str], dimension: usize) -> Result<EmbeddingStore, EmbeddingError> {
    if dimension < 2 {
        return Err(EmbeddingError::InvalidDimension(dimension));
    }
    if words.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    let entries = words.iter().map(|w| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(w.as_bytes()).rotate_left(17));
        let mut v: Vec<f64> = loop {
            let v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
            if norm(&v) > 1e-6 {
                break v;
            }
        };
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        (w.to_string(), v)
    });
    Ok(EmbeddingStore::from_entries(dimension, entries)?.0)
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
