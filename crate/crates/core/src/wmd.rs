//! Word Mover's Distance between short texts.
//!
//! Documents are normalized bags of words over an [`EmbeddingStore`]; the
//! ground cost is the Euclidean distance between word vectors. [`wmd`] is
//! exact (min-cost flow on integer-scaled masses) and returns the transport
//! plan that certifies its value. [`relaxed_wmd`] is the usual lower bound
//! that drops one marginal constraint; it is only used to prune candidates.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::embeddings::{euclidean, EmbeddingStore};
use crate::transport;

/// Integer resolution of the exact solver. Each scaled weight is within one
/// unit of its real value, so plan marginals are accurate to ~1e-12.
const MASS_SCALE: i64 = 1_000_000_000_000;
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum WmdError {
    #[error("document has no tokens")]
    EmptyTokens,
    #[error("every token is out of vocabulary")]
    AllOutOfVocabulary,
    #[error("word not in vocabulary: {0}")]
    OutOfVocabulary(String),
    #[error("weight for {0:?} must be positive and finite")]
    BadWeight(String),
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("duplicate word {0:?}")]
    DuplicateWord(String),
    #[error("distance must be finite and non-negative, got {0}")]
    BadDistance(f64),
}

/// Normalized bag of words: unique in-vocabulary words with positive weights
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDoc {
    items: Vec<(String, f64)>,
}

impl WeightedDoc {
    pub fn new(items: Vec<(String, f64)>, store: &EmbeddingStore) -> Result<Self, WmdError> {
        if items.is_empty() {
            return Err(WmdError::EmptyTokens);
        }
        let mut seen = std::collections::HashSet::new();
        for (word, weight) in &items {
            if !store.contains(word) {
                return Err(WmdError::OutOfVocabulary(word.clone()));
            }
            if !(weight.is_finite() && *weight > 0.0) {
                return Err(WmdError::BadWeight(word.clone()));
            }
            if !seen.insert(word.as_str()) {
                return Err(WmdError::DuplicateWord(word.clone()));
            }
        }
        let total: f64 = items.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(WmdError::NotNormalized(total));
        }
        Ok(WeightedDoc { items })
    }

    pub fn items(&self) -> &[(String, f64)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn weight(&self, word: &str) -> Option<f64> {
        self.items.iter().find(|(w, _)| w == word).map(|(_, x)| *x)
    }
}

/// One cell of a transport plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub source: String,
    pub target: String,
    pub mass: f64,
}

/// Certificate for an exact distance: non-zero flows and their total cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub flows: Vec<Flow>,
    pub cost: f64,
}

impl TransportPlan {
    /// Total mass leaving `word` on the source side.
    pub fn outflow(&self, word: &str) -> f64 {
        self.flows.iter().filter(|f| f.source == word).map(|f| f.mass).sum()
    }

    /// Total mass arriving at `word` on the target side.
    pub fn inflow(&self, word: &str) -> f64 {
        self.flows.iter().filter(|f| f.target == word).map(|f| f.mass).sum()
    }
}

/// Normalized bag of words. Out-of-vocabulary tokens are dropped; word order
/// follows first occurrence.
pub fn nbow<S: AsRef<str>>(tokens: &[S], store: &EmbeddingStore) -> Result<WeightedDoc, WmdError> {
    if tokens.is_empty() {
        return Err(WmdError::EmptyTokens);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        let t = t.as_ref();
        if !store.contains(t) {
            continue;
        }
        let c = counts.entry(t).or_insert(0);
        if *c == 0 {
            order.push(t);
        }
        *c += 1;
    }
    if order.is_empty() {
        return Err(WmdError::AllOutOfVocabulary);
    }
    let total: usize = counts.values().sum();
    let items = order.into_iter().map(|w| (w.to_string(), counts[w] as f64 / total as f64)).collect();
    Ok(WeightedDoc { items })
}

fn cost_matrix(a: &WeightedDoc, b: &WeightedDoc, store: &EmbeddingStore) -> Vec<Vec<f64>> {
    let vb: Vec<&[f64]> = b.items.iter().map(|(w, _)| vector(store, w)).collect();
    a.items
        .iter()
        .map(|(w, _)| {
            let va = vector(store, w);
            vb.iter().map(|v| euclidean(va, v)).collect()
        })
        .collect()
}

fn vector<'a>(store: &'a EmbeddingStore, word: &str) -> &'a [f64] {
    store.get(word).unwrap_or_else(|| panic!("{word:?} missing from the store the document was built against"))
}

/// Exact Word Mover's Distance and an optimal plan.
///
/// Both documents must have been built against `store`.
pub fn wmd(a: &WeightedDoc, b: &WeightedDoc, store: &EmbeddingStore) -> (f64, TransportPlan) {
    let cost = cost_matrix(a, b, store);
    let wa: Vec<f64> = a.items.iter().map(|(_, w)| *w).collect();
    let wb: Vec<f64> = b.items.iter().map(|(_, w)| *w).collect();
    let supply = transport::scale_weights(&wa, MASS_SCALE);
    let demand = transport::scale_weights(&wb, MASS_SCALE);
    let solution = transport::solve(&supply, &demand, &cost);

    let mut flows = Vec::new();
    let mut total = 0.0;
    for (i, row) in solution.flow.iter().enumerate() {
        for (j, &units) in row.iter().enumerate() {
            if units == 0 {
                continue;
            }
            let mass = units as f64 / MASS_SCALE as f64;
            total += mass * cost[i][j];
            flows.push(Flow { source: a.items[i].0.clone(), target: b.items[j].0.clone(), mass });
        }
    }
    (total, TransportPlan { flows, cost: total })
}

/// Relaxed WMD: the larger of the two one-sided bounds where every word sends
/// all its mass to its nearest counterpart. Never exceeds [`wmd`].
pub fn relaxed_wmd(a: &WeightedDoc, b: &WeightedDoc, store: &EmbeddingStore) -> f64 {
    let cost = cost_matrix(a, b, store);
    let forward: f64 =
        a.items.iter().zip(&cost).map(|((_, w), row)| w * row.iter().copied().fold(f64::INFINITY, f64::min)).sum();
    let backward: f64 = b
        .items
        .iter()
        .enumerate()
        .map(|(j, (_, w))| w * cost.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min))
        .sum();
    forward.max(backward)
}

/// Maps a distance to a similarity in (0, 1] via `1 / (1 + d)`.
pub fn to_similarity(distance: f64) -> Result<f64, WmdError> {
    if !distance.is_finite() || distance < 0.0 {
        return Err(WmdError::BadDistance(distance));
    }
    Ok(1.0 / (1.0 + distance))
}
