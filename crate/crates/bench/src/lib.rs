//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use companion_core::templates::TemplateConfig;
use companion_core::{synthetic_store, EmbeddingStore, ResourcePaths, Resources, WeightedDoc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A seeded synthetic vocabulary `w0000..`.
pub fn store(vocab: usize, dimension: usize) -> EmbeddingStore {
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i:04}")).collect();
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    synthetic_store(1, &refs, dimension).expect("valid synthetic store")
}

/// `count` documents of exactly `len` distinct words with random weights.
pub fn documents(store: &EmbeddingStore, count: usize, len: usize, seed: u64) -> Vec<WeightedDoc> {
    let words: Vec<&str> = store.words().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let picked = sample(&mut rng, words.len(), len);
            let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let items = picked.iter().zip(&raw).map(|(i, w)| (words[i].to_string(), w / total)).collect();
            WeightedDoc::new(items, store).expect("valid document")
        })
        .collect()
}

/// The bundled resource directory.
pub fn bundled_resources() -> Resources {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    Resources::load(&ResourcePaths::in_dir(dir), &TemplateConfig::default()).expect("bundled resources load")
}
