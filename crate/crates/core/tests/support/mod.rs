//! Brute-force reference implementations used to cross-check the library.
//!
//! Everything here works from raw `Vec<Vec<u8>>` rows and a plain label
//! vector, never from `Clustering::members` or the library's distance code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn euclid(a: &[u8], b: &[u8]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn groups(rows: &[Vec<u8>], labels: &[Option<usize>]) -> BTreeMap<usize, Vec<Vec<u8>>> {
    let mut g: BTreeMap<usize, Vec<Vec<u8>>> = BTreeMap::new();
    for (row, label) in rows.iter().zip(labels) {
        if let Some(c) = label {
            g.entry(*c).or_default().push(row.clone());
        }
    }
    g
}

fn diam(points: &[Vec<u8>]) -> f64 {
    let mut best = 0.0f64;
    for a in points {
        for b in points {
            best = best.max(euclid(a, b));
        }
    }
    best
}

/// Davies-Bouldin with average linkage; `None` when undefined.
pub fn davies_bouldin(rows: &[Vec<u8>], labels: &[Option<usize>]) -> Option<f64> {
    let g: Vec<Vec<Vec<u8>>> = groups(rows, labels).into_values().collect();
    if g.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    for i in 0..g.len() {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..g.len() {
            if i == j {
                continue;
            }
            let mut total = 0.0;
            for a in &g[i] {
                for b in &g[j] {
                    total += euclid(a, b);
                }
            }
            let avg = total / (g[i].len() * g[j].len()) as f64;
            if avg == 0.0 {
                return None;
            }
            worst = worst.max((diam(&g[i]) + diam(&g[j])) / avg);
        }
        sum += worst;
    }
    Some(sum / g.len() as f64)
}

/// Dunn index over all labelled point pairs; `None` when undefined.
pub fn dunn(rows: &[Vec<u8>], labels: &[Option<usize>]) -> Option<f64> {
    let clusters = groups(rows, labels).len();
    if clusters < 2 {
        return None;
    }
    let mut min_between = f64::INFINITY;
    let mut max_within = 0.0f64;
    for (p, lp) in rows.iter().zip(labels) {
        for (q, lq) in rows.iter().zip(labels) {
            match (lp, lq) {
                (Some(a), Some(b)) if a == b => max_within = max_within.max(euclid(p, q)),
                (Some(_), Some(_)) => min_between = min_between.min(euclid(p, q)),
                _ => {}
            }
        }
    }
    (max_within > 0.0).then(|| min_between / max_within)
}

/// Class-weighted precision, recall and F at each class's best-F cluster.
pub fn external(labels: &[Option<usize>], classes: &[&str]) -> (f64, f64, f64) {
    let assigned: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    let n = assigned.len() as f64;
    let mut class_names: Vec<&str> = assigned.iter().map(|&i| classes[i]).collect();
    class_names.sort();
    class_names.dedup();
    let mut cluster_ids: Vec<usize> = assigned.iter().map(|&i| labels[i].unwrap()).collect();
    cluster_ids.sort();
    cluster_ids.dedup();

    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for class in class_names {
        let x_i = assigned.iter().filter(|&&i| classes[i] == class).count() as f64;
        let mut best = (-1.0, 0.0, 0.0);
        for &cluster in &cluster_ids {
            let x_j = assigned.iter().filter(|&&i| labels[i] == Some(cluster)).count() as f64;
            let x_ij = assigned
                .iter()
                .filter(|&&i| labels[i] == Some(cluster) && classes[i] == class)
                .count() as f64;
            let (p, r) = (x_ij / x_j, x_ij / x_i);
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            if f > best.0 {
                best = (f, p, r);
            }
        }
        let w = x_i / n;
        f_sum += w * best.0;
        p_sum += w * best.1;
        r_sum += w * best.2;
    }
    (p_sum, r_sum, f_sum)
}

/// A random labelled instance: `n <= 30` rows, `m <= 8` columns, `2 <= k <= 5`.
pub struct Instance {
    pub rows: Vec<Vec<u8>>,
    pub k: usize,
    pub labels: Vec<usize>,
    pub classes: Vec<&'static str>,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=5);
    let n = rng.random_range(k..=30);
    let m = rng.random_range(1..=8);
    let rows = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(0..=1u8)).collect())
        .collect();
    // the first k rows seed every cluster so none is empty
    let labels = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    const CLASSES: [&str; 4] = ["w", "x", "y", "z"];
    let classes = (0..n).map(|_| CLASSES[rng.random_range(0..4)]).collect();
    Instance {
        rows,
        k,
        labels,
        classes,
    }
}
