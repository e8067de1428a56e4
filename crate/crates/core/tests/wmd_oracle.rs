//! Exact WMD against independent references: values frozen from an
//! off-the-shelf LP solver, and the basis-enumeration oracle on random
//! small documents.

mod common;

use common::{basis_oracle, cost_matrix, random_doc, vocab, weights};
use companion_core::{relaxed_wmd, synthetic_store, to_similarity, wmd, EmbeddingStore, WeightedDoc};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture() -> EmbeddingStore {
    let rows = [
        ("sun", [0.0, 0.0, 1.0]),
        ("moon", [1.0, 2.0, 0.0]),
        ("star", [-1.5, 0.5, 2.0]),
        ("sea", [3.0, -1.0, 0.5]),
        ("sky", [0.5, 0.5, 0.5]),
    ];
    EmbeddingStore::from_entries(3, rows.iter().map(|(w, v)| (w.to_string(), v.to_vec()))).unwrap().0
}

fn doc(items: &[(&str, f64)], store: &EmbeddingStore) -> WeightedDoc {
    WeightedDoc::new(items.iter().map(|(w, x)| (w.to_string(), *x)).collect(), store).unwrap()
}

#[test]
fn three_by_two_matches_lp_solver() {
    let store = fixture();
    let a = doc(&[("sun", 0.5), ("moon", 0.3), ("star", 0.2)], &store);
    let b = doc(&[("sea", 0.6), ("sky", 0.4)], &store);
    let (d, plan) = wmd(&a, &b, &store);
    // Optimum and plan from a HiGHS linear program over the same costs.
    assert!((d - 2.7256901997638927).abs() < 1e-9, "{d}");
    assert!((relaxed_wmd(&a, &b, &store) - 2.26734743274363).abs() < 1e-9);
    let expected = [("sun", "sea", 0.3), ("sun", "sky", 0.2), ("moon", "sea", 0.3), ("star", "sky", 0.2)];
    for (s, t, m) in expected {
        let got: f64 = plan.flows.iter().filter(|f| f.source == s && f.target == t).map(|f| f.mass).sum();
        assert!((got - m).abs() < 1e-9, "{s}->{t}: {got}");
    }
    assert!((to_similarity(d).unwrap() - 1.0 / 3.7256901997638927).abs() < 1e-12);
}

#[test]
fn random_small_documents_match_basis_enumeration() {
    let words = vocab(12);
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let store = synthetic_store(21, &refs, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..300 {
        let a = random_doc(&mut rng, &store, 3);
        let b = random_doc(&mut rng, &store, 3);
        let oracle = basis_oracle(&weights(&a), &weights(&b), &cost_matrix(&a, &b, &store));
        let (d, _) = wmd(&a, &b, &store);
        assert!((d - oracle).abs() < 1e-6, "wmd {d} oracle {oracle}");
    }
}

proptest! {
    #[test]
    fn plan_marginals_match_weights(seed in any::<u64>()) {
        let words = vocab(20);
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let store = synthetic_store(seed, &refs, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_doc(&mut rng, &store, 6);
        let b = random_doc(&mut rng, &store, 6);
        let (d, plan) = wmd(&a, &b, &store);
        for (w, x) in a.items() {
            prop_assert!((plan.outflow(w) - x).abs() < 1e-9);
        }
        for (w, x) in b.items() {
            prop_assert!((plan.inflow(w) - x).abs() < 1e-9);
        }
        prop_assert!(relaxed_wmd(&a, &b, &store) <= d + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(seed in any::<u64>()) {
        let words = vocab(40);
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let store = synthetic_store(seed, &refs, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(7));
        let (a, b, c) =
            (random_doc(&mut rng, &store, 8), random_doc(&mut rng, &store, 8), random_doc(&mut rng, &store, 8));
        let (ab, ba, bc, ac) = (wmd(&a, &b, &store).0, wmd(&b, &a, &store).0, wmd(&b, &c, &store).0, wmd(&a, &c, &store).0);
        prop_assert!(ab >= 0.0);
        prop_assert!(wmd(&a, &a, &store).0.abs() <= 1e-9);
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
    }
}
