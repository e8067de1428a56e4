//! Helpers shared by the integration tests: an independent transport oracle
//! and random document generators.

#![allow(dead_code)]

use std::path::PathBuf;

use companion_core::{EmbeddingStore, WeightedDoc};
use rand::seq::index::sample;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Minimum transport cost by enumerating every basis of the transportation
/// polytope: choose `m + n - 1` cells, solve the row/column equalities on
/// them, keep non-negative solutions. Only practical for tiny problems.
pub fn basis_oracle(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let size = m + n - 1;
    let mut rhs: Vec<f64> = supply.to_vec();
    rhs.extend_from_slice(&demand[..n - 1]);
    let mut best = f64::INFINITY;
    for subset in combinations(cells.len(), size) {
        // Row r < m is supply r; row m + c is demand c (last demand dropped).
        let mut a = vec![vec![0.0; size + 1]; size];
        for (col, &k) in subset.iter().enumerate() {
            let (i, j) = cells[k];
            a[i][col] = 1.0;
            if j < n - 1 {
                a[m + j][col] = 1.0;
            }
        }
        for (r, row) in a.iter_mut().enumerate() {
            row[size] = rhs[r];
        }
        let Some(x) = gauss(a) else { continue };
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let total: f64 = subset.iter().zip(&x).map(|(&k, &v)| cost[cells[k].0][cells[k].1] * v).sum();
        best = best.min(total);
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Solves a square augmented system; `None` when singular.
fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some((0..n).map(|r| a[r][n] / a[r][r]).collect())
}

/// 2×2 transport cost by scanning the single free variable `x = T[0][0]`.
pub fn scan_oracle_2x2(supply: [f64; 2], demand: [f64; 2], cost: [[f64; 2]; 2], step: f64) -> f64 {
    let lo = (supply[0] - demand[1]).max(0.0);
    let hi = supply[0].min(demand[0]);
    let eval = |x: f64| {
        cost[0][0] * x
            + cost[0][1] * (supply[0] - x)
            + cost[1][0] * (demand[0] - x)
            + cost[1][1] * (supply[1] - demand[0] + x)
    };
    let steps = ((hi - lo) / step).ceil() as usize;
    (0..=steps).map(|k| eval((lo + k as f64 * step).min(hi))).fold(f64::INFINITY, f64::min)
}

pub fn random_doc<R: Rng>(rng: &mut R, store: &EmbeddingStore, max_len: usize) -> WeightedDoc {
    let words: Vec<&str> = store.words().collect();
    let len = rng.random_range(1..=max_len.min(words.len()));
    let picked = sample(rng, words.len(), len);
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let items = picked.iter().zip(&raw).map(|(i, w)| (words[i].to_string(), w / total)).collect();
    WeightedDoc::new(items, store).expect("valid random document")
}

pub fn cost_matrix(a: &WeightedDoc, b: &WeightedDoc, store: &EmbeddingStore) -> Vec<Vec<f64>> {
    a.items().iter().map(|(x, _)| b.items().iter().map(|(y, _)| store.distance(x, y).unwrap()).collect()).collect()
}

pub fn weights(d: &WeightedDoc) -> Vec<f64> {
    d.items().iter().map(|(_, w)| *w).collect()
}

pub fn vocab(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:03}")).collect()
}
