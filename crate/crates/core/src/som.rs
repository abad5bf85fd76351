//! Rectangular self-organising map.
//!
//! Training presents one session row at a time. The best matching unit (BMU)
//! is the neuron nearest the input, and every neuron `v` is pulled toward the
//! input by
//!
//! ```text
//! W_v <- W_v + theta(t) * alpha(t) * (D(t) - W_v)
//! ```
//!
//! where `alpha(t) = alpha0 * exp(-t / lambda)`, `sigma(t) = sigma0 * exp(-t / lambda)`
//! and `theta(t) = exp(-g^2 / (2 sigma(t)^2))` with `g` the lattice distance
//! between `v` and the BMU.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Clustering, Method};
use crate::kmeans::squared_distance;
use crate::matrix::SessionMatrix;

pub const DEFAULT_ALPHA0: f64 = 0.5;
/// Training length in presentations per matrix row.
pub const DEFAULT_PRESENTATIONS_PER_ROW: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum SomError {
    #[error("grid must have at least one row, one column and one weight ({rows}x{cols}, dim {dim})")]
    EmptyGrid { rows: usize, cols: usize, dim: usize },
    #[error("input has dimension {found}, grid expects {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("invalid schedule: {0}")]
    BadSchedule(&'static str),
    #[error("cannot train on an empty matrix")]
    NoData,
}

/// Learning-rate and neighbourhood schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomSchedule {
    /// Total number of presentations; also the decay time constant.
    pub lambda: usize,
    pub alpha0: f64,
    pub sigma0: f64,
}

impl SomSchedule {
    pub fn new(lambda: usize, alpha0: f64, sigma0: f64) -> Result<Self, SomError> {
        if lambda == 0 {
            return Err(SomError::BadSchedule("lambda must be at least 1"));
        }
        if !(alpha0 > 0.0 && alpha0 <= 1.0) {
            return Err(SomError::BadSchedule("alpha0 must be in (0, 1]"));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(SomError::BadSchedule("sigma0 must be positive"));
        }
        Ok(Self {
            lambda,
            alpha0,
            sigma0,
        })
    }

    /// `alpha0 = 0.5`, `sigma0 = max(rows, cols) / 2`, `lambda = 500 * n_rows`.
    pub fn default_for(grid_rows: usize, grid_cols: usize, n_rows: usize) -> Self {
        Self {
            lambda: (DEFAULT_PRESENTATIONS_PER_ROW * n_rows).max(1),
            alpha0: DEFAULT_ALPHA0,
            sigma0: grid_rows.max(grid_cols) as f64 / 2.0,
        }
    }

    fn decay(&self, t: usize) -> f64 {
        (-(t as f64) / self.lambda as f64).exp()
    }

    pub fn learning_rate(&self, t: usize) -> f64 {
        self.alpha0 * self.decay(t)
    }

    pub fn radius(&self, t: usize) -> f64 {
        self.sigma0 * self.decay(t)
    }

    /// Gaussian neighbourhood weight for a neuron `grid_distance` away from the BMU.
    pub fn neighbourhood(&self, t: usize, grid_distance: f64) -> f64 {
        let sigma = self.radius(t);
        (-(grid_distance * grid_distance) / (2.0 * sigma * sigma)).exp()
    }
}

/// `rows x cols` lattice of weight vectors, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<Vec<f64>>,
}

impl SomGrid {
    /// Weights drawn i.i.d. uniform in `[0, 1]` under `seed`.
    pub fn random(rows: usize, cols: usize, dim: usize, seed: u64) -> Result<Self, SomError> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(SomError::EmptyGrid { rows, cols, dim });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..rows * cols)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect())
            .collect();
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn from_weights(rows: usize, cols: usize, weights: Vec<Vec<f64>>) -> Result<Self, SomError> {
        let dim = weights.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || dim == 0 || weights.len() != rows * cols {
            return Err(SomError::EmptyGrid { rows, cols, dim });
        }
        if let Some(w) = weights.iter().find(|w| w.len() != dim) {
            return Err(SomError::DimensionMismatch {
                found: w.len(),
                expected: dim,
            });
        }
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_neurons(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron]
    }

    /// Lattice coordinates `(row, col)` of a neuron.
    pub fn position(&self, neuron: usize) -> (usize, usize) {
        (neuron / self.cols, neuron % self.cols)
    }

    pub fn grid_distance(&self, a: usize, b: usize) -> f64 {
        let (ar, ac) = self.position(a);
        let (br, bc) = self.position(b);
        let dr = ar.abs_diff(br) as f64;
        let dc = ac.abs_diff(bc) as f64;
        (dr * dr + dc * dc).sqrt()
    }

    /// Neuron nearest `input` in Euclidean distance; ties go to the lowest
    /// row-major index.
    pub fn find_bmu(&self, input: &[u8]) -> Result<usize, SomError> {
        if input.len() != self.dim {
            return Err(SomError::DimensionMismatch {
                found: input.len(),
                expected: self.dim,
            });
        }
        Ok(self.bmu_unchecked(input))
    }

    fn bmu_unchecked(&self, input: &[u8]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (v, w) in self.weights.iter().enumerate() {
            let d = squared_distance(input, w);
            if d < best_d {
                best = v;
                best_d = d;
            }
        }
        best
    }

    /// Applies one training step at time `t` for `input` and returns the BMU.
    pub fn update(&mut self, input: &[u8], t: usize, schedule: &SomSchedule) -> Result<usize, SomError> {
        let bmu = self.find_bmu(input)?;
        let alpha = schedule.learning_rate(t);
        for v in 0..self.weights.len() {
            let rate = schedule.neighbourhood(t, self.grid_distance(v, bmu)) * alpha;
            for (w, &x) in self.weights[v].iter_mut().zip(input) {
                let target = f64::from(x);
                let next = *w + rate * (target - *w);
                // rounding must not carry the weight past the input
                *w = if target >= *w { next.min(target) } else { next.max(target) };
            }
        }
        Ok(bmu)
    }

    /// Trains for `schedule.lambda` presentations. Rows are presented in a
    /// seeded random order, reshuffled after every full sweep.
    pub fn train(
        mut self,
        matrix: &SessionMatrix,
        schedule: &SomSchedule,
        seed: u64,
    ) -> Result<Self, SomError> {
        if matrix.is_empty() {
            return Err(SomError::NoData);
        }
        if matrix.n_cols() != self.dim {
            return Err(SomError::DimensionMismatch {
                found: matrix.n_cols(),
                expected: self.dim,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..matrix.n_rows()).collect();
        for t in 0..schedule.lambda {
            let pos = t % order.len();
            if pos == 0 {
                order.shuffle(&mut rng);
            }
            self.update(matrix.row(order[pos]), t, schedule)?;
        }
        Ok(self)
    }

    /// BMU of every matrix row.
    pub fn bmus(&self, matrix: &SessionMatrix) -> Result<Vec<usize>, SomError> {
        matrix.rows().map(|r| self.find_bmu(r)).collect()
    }

    /// Clusters rows by BMU. Neurons that are never a BMU produce no cluster;
    /// the remaining ones are numbered densely in row-major order.
    pub fn clustering(&self, matrix: &SessionMatrix) -> Result<Clustering, SomError> {
        let bmus = self.bmus(matrix)?;
        let mut dense = vec![None; self.n_neurons()];
        for &b in &bmus {
            dense[b] = Some(());
        }
        let mut next = 0;
        let remap: Vec<Option<usize>> = dense
            .into_iter()
            .map(|used| {
                used.map(|_| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        let labels: Vec<usize> = bmus.iter().map(|&b| remap[b].expect("bmu is used")).collect();
        Ok(Clustering::from_labels(next.max(1), &labels, Method::Som)
            .expect("dense labels are below the used-neuron count"))
    }
}

/// Shorthand for [`SomGrid::random`].
pub fn init_grid(rows: usize, cols: usize, dim: usize, seed: u64) -> Result<SomGrid, SomError> {
    SomGrid::random(rows, cols, dim, seed)
}

/// Grid used when only a neuron count is given: `5 x (k / 5)` when `k` is a
/// multiple of five, otherwise a single row of `k` neurons.
pub fn default_grid_shape(k: usize) -> (usize, usize) {
    if k >= 5 && k.is_multiple_of(5) {
        (5, k / 5)
    } else {
        (1, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[u8]]) -> SessionMatrix {
        SessionMatrix::from_binary_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn random_grid_shape_and_range() {
        let g = init_grid(5, 2, 43, 1).unwrap();
        assert_eq!(g.n_neurons(), 10);
        for v in 0..10 {
            assert_eq!(g.weight(v).len(), 43);
            assert!(g.weight(v).iter().all(|w| (0.0..=1.0).contains(w)));
        }
        assert_eq!(g, init_grid(5, 2, 43, 1).unwrap());
        assert_ne!(g, init_grid(5, 2, 43, 2).unwrap());
        assert_eq!(init_grid(1, 1, 3, 0).unwrap().n_neurons(), 1);
        assert!(init_grid(0, 1, 3, 0).is_err());
    }

    #[test]
    fn bmu_exact_match_and_ties() {
        let g = SomGrid::from_weights(1, 2, vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(g.find_bmu(&[1, 1]).unwrap(), 1);
        assert_eq!(g.find_bmu(&[0, 0]).unwrap(), 0);

        let g = SomGrid::from_weights(1, 3, vec![vec![5.0, 5.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(g.find_bmu(&[1, 1]).unwrap(), 1);
        assert_eq!(
            g.find_bmu(&[1]),
            Err(SomError::DimensionMismatch { found: 1, expected: 2 })
        );
    }

    #[test]
    fn neighbourhood_peaks_at_bmu_and_decreases() {
        let s = SomSchedule::new(100, 0.5, 2.0).unwrap();
        assert_eq!(s.neighbourhood(10, 0.0), 1.0);
        let mut prev = 1.0;
        for g in 1..6 {
            let theta = s.neighbourhood(10, g as f64);
            assert!(theta < prev);
            prev = theta;
        }
        assert!((s.learning_rate(100) - 0.5 / std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn schedule_validation() {
        assert!(SomSchedule::new(0, 0.5, 1.0).is_err());
        assert!(SomSchedule::new(1, 0.0, 1.0).is_err());
        assert!(SomSchedule::new(1, 1.5, 1.0).is_err());
        assert!(SomSchedule::new(1, 1.0, 0.0).is_err());
        let d = SomSchedule::default_for(5, 3, 10);
        assert_eq!((d.lambda, d.alpha0, d.sigma0), (5000, 0.5, 2.5));
    }

    #[test]
    fn single_neuron_convex_step() {
        let mut g = SomGrid::from_weights(1, 1, vec![vec![0.2, 0.9, 0.5]]).unwrap();
        let s = SomSchedule::new(10, 0.5, 1.0).unwrap();
        g.update(&[1, 0, 1], 0, &s).unwrap();
        // alpha(0) = 0.5, theta = 1 at the BMU
        let expected = [0.6, 0.45, 0.75];
        for (w, e) in g.weight(0).iter().zip(expected) {
            assert!((w - e).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_rate_is_identity() {
        let g = init_grid(2, 2, 4, 3).unwrap();
        let m = matrix(&[&[1, 0, 1, 0], &[0, 1, 0, 1]]);
        let s = SomSchedule::new(50, f64::MIN_POSITIVE, 1.0).unwrap();
        let trained = g.clone().train(&m, &s, 0).unwrap();
        for v in 0..4 {
            for (a, b) in g.weight(v).iter().zip(trained.weight(v)) {
                assert!((a - b).abs() < 1e-300);
            }
        }
    }

    #[test]
    fn repeated_input_pulls_bmu_in() {
        let m = matrix(&[&[1, 1, 0, 0, 1]]);
        let g = init_grid(1, 1, 5, 9).unwrap();
        let dist = |g: &SomGrid| squared_distance(m.row(0), g.weight(0)).sqrt();
        let before = dist(&g);
        let s = SomSchedule::new(200, 0.5, 1.0).unwrap();
        let after = g.train(&m, &s, 0).unwrap();
        assert!(dist(&after) < before);
        assert!(dist(&after) < 1e-6);
    }

    #[test]
    fn identical_sessions_give_one_cluster() {
        let m = matrix(&[&[1, 0, 1], &[1, 0, 1], &[1, 0, 1]]);
        let g = init_grid(2, 2, 3, 5).unwrap();
        let c = g.clustering(&m).unwrap();
        assert_eq!(c.k(), 1);
        assert_eq!(c.members(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn unused_neuron_yields_no_cluster() {
        let g = SomGrid::from_weights(
            1,
            3,
            vec![vec![1.0, 0.0], vec![9.0, 9.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let m = matrix(&[&[1, 0], &[0, 1], &[0, 1]]);
        let c = g.clustering(&m).unwrap();
        assert_eq!(c.k(), 2);
        assert_eq!(c.members(), vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn default_shapes() {
        assert_eq!(default_grid_shape(10), (5, 2));
        assert_eq!(default_grid_shape(15), (5, 3));
        assert_eq!(default_grid_shape(20), (5, 4));
        assert_eq!(default_grid_shape(3), (1, 3));
    }

    #[test]
    fn grid_json_round_trip() {
        let g = init_grid(2, 3, 4, 11).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<SomGrid>(&json).unwrap(), g);
    }
}
