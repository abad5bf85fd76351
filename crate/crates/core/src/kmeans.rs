//! Lloyd's K-Means over the rows of a [`SessionMatrix`].
//!
//! Centroids start as `k` distinct matrix rows sampled under a seed, then the
//! algorithm alternates nearest-centroid assignment and mean updates until the
//! labels stop changing. The quantity being minimised is the within-cluster
//! sum of squared Euclidean distances, see [`objective`].

use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Clustering, Method};
use crate::matrix::SessionMatrix;

pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KMeansError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of rows ({n})")]
    TooManyClusters { k: usize, n: usize },
    #[error("k = {k} exceeds the number of distinct rows ({distinct})")]
    TooFewDistinctRows { k: usize, distinct: usize },
    #[error("max_iter must be at least 1")]
    ZeroMaxIter,
}

/// Cluster centres, one `m`-dimensional vector per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    vectors: Vec<Vec<f64>>,
}

impl Centroids {
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        assert!(!vectors.is_empty(), "at least one centroid");
        let m = vectors[0].len();
        assert!(vectors.iter().all(|v| v.len() == m), "uniform dimension");
        Self { vectors }
    }

    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn get(&self, c: usize) -> &[f64] {
        &self.vectors[c]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

pub(crate) fn squared_distance(row: &[u8], centre: &[f64]) -> f64 {
    row.iter()
        .zip(centre)
        .map(|(&x, &c)| {
            let d = f64::from(x) - c;
            d * d
        })
        .sum()
}

/// Picks `k` distinct rows uniformly without replacement (Forgy initialisation).
///
/// Sampling is over distinct row *values*, so no two initial centroids coincide.
pub fn init_centroids(matrix: &SessionMatrix, k: usize, seed: u64) -> Result<Centroids, KMeansError> {
    if k == 0 {
        return Err(KMeansError::ZeroK);
    }
    let n = matrix.n_rows();
    if k > n {
        return Err(KMeansError::TooManyClusters { k, n });
    }
    let mut seen = HashSet::new();
    let distinct: Vec<usize> = (0..n).filter(|&i| seen.insert(matrix.row(i))).collect();
    if k > distinct.len() {
        return Err(KMeansError::TooFewDistinctRows {
            k,
            distinct: distinct.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = index::sample(&mut rng, distinct.len(), k)
        .into_iter()
        .map(|d| matrix.row(distinct[d]).iter().map(|&v| f64::from(v)).collect())
        .collect();
    Ok(Centroids::new(vectors))
}

/// Labels each row with its nearest centroid; ties go to the lowest index.
pub fn assign(matrix: &SessionMatrix, centroids: &Centroids) -> Vec<usize> {
    assert_eq!(centroids.dim(), matrix.n_cols(), "centroid dimension");
    matrix
        .rows()
        .map(|row| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centre) in centroids.vectors.iter().enumerate() {
                let d = squared_distance(row, centre);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Recomputes each centroid as the mean of its member rows. A cluster with no
/// members keeps its centroid from `previous`.
pub fn update_centroids(matrix: &SessionMatrix, labels: &[usize], previous: &Centroids) -> Centroids {
    let k = previous.k();
    let m = matrix.n_cols();
    let mut sums = vec![vec![0.0; m]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in matrix.rows().zip(labels) {
        counts[c] += 1;
        for (s, &x) in sums[c].iter_mut().zip(row) {
            *s += f64::from(x);
        }
    }
    let vectors = sums
        .into_iter()
        .zip(counts)
        .enumerate()
        .map(|(c, (sum, count))| {
            if count == 0 {
                previous.vectors[c].clone()
            } else {
                sum.into_iter().map(|s| s / count as f64).collect()
            }
        })
        .collect();
    Centroids { vectors }
}

/// Within-cluster sum of squared distances to the assigned centroid.
/// Unassigned rows do not contribute.
pub fn objective(matrix: &SessionMatrix, clustering: &Clustering, centroids: &Centroids) -> f64 {
    clustering
        .labels()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|c| squared_distance(matrix.row(i), centroids.get(c))))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub clustering: Clustering,
    pub centroids: Centroids,
    /// Number of update/assign rounds performed.
    pub iterations: usize,
    /// `true` if labels reached a fixed point, `false` if `max_iter` was hit.
    pub converged: bool,
    /// Objective after each centroid update, in order.
    pub objective_trace: Vec<f64>,
}

impl KMeansRun {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

/// Runs Lloyd iterations until the labels are unchanged or `max_iter` rounds
/// have been performed.
pub fn kmeans_run(matrix: &SessionMatrix, params: KMeansParams) -> Result<KMeansRun, KMeansError> {
    if params.max_iter == 0 {
        return Err(KMeansError::ZeroMaxIter);
    }
    let mut centroids = init_centroids(matrix, params.k, params.seed)?;
    let mut labels = assign(matrix, &centroids);
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        centroids = update_centroids(matrix, &labels, &centroids);
        let j = labelled_objective(matrix, &labels, &centroids);
        if let Some(&prev) = trace.last() {
            debug_assert!(j <= prev + 1e-9 * prev.max(1.0), "objective rose from {prev} to {j}");
        }
        trace.push(j);

        let next = assign(matrix, &centroids);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }

    let clustering = Clustering::from_labels(params.k, &labels, Method::KMeans)
        .expect("assign only yields labels below k");
    Ok(KMeansRun {
        clustering,
        centroids,
        iterations,
        converged,
        objective_trace: trace,
    })
}

fn labelled_objective(matrix: &SessionMatrix, labels: &[usize], centroids: &Centroids) -> f64 {
    matrix
        .rows()
        .zip(labels)
        .map(|(row, &c)| squared_distance(row, centroids.get(c)))
        .sum()
}
