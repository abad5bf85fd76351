//! Knockout refinement of clusters.
//!
//! Within each cluster, every pair of sessions is compared through its 2x2
//! contingency table. Pages viewed by neither session (`t`) carry no
//! information, so the pair dissimilarity is
//!
//! ```text
//! d(i, j) = (r + s) / (q + r + s)
//! ```
//!
//! These values fill the cluster's symmetric dissimilarity matrix (SDM). A
//! session is knocked out when more than `count_limit` of its cluster-mates are
//! further than `threshold` from it. Counting is done once, on the original
//! SDM, and knocked-out sessions are left unassigned.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Clustering, Method};
use crate::matrix::SessionMatrix;

pub const DEFAULT_THRESHOLD: f64 = 0.3;
pub const DEFAULT_COUNT_LIMIT: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum KraError {
    #[error("vectors differ in length ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
}

/// Co-occurrence counts between two binary vectors `a` and `b`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ContingencyCounts {
    /// 1 in both.
    pub q: usize,
    /// 1 in `a`, 0 in `b`.
    pub r: usize,
    /// 0 in `a`, 1 in `b`.
    pub s: usize,
    /// 0 in both.
    pub t: usize,
}

impl ContingencyCounts {
    pub fn total(&self) -> usize {
        self.q + self.r + self.s + self.t
    }
}

pub fn contingency(a: &[u8], b: &[u8]) -> Result<ContingencyCounts, KraError> {
    if a.len() != b.len() {
        return Err(KraError::DimensionMismatch(a.len(), b.len()));
    }
    let mut counts = ContingencyCounts::default();
    for (&x, &y) in a.iter().zip(b) {
        match (x != 0, y != 0) {
            (true, true) => counts.q += 1,
            (true, false) => counts.r += 1,
            (false, true) => counts.s += 1,
            (false, false) => counts.t += 1,
        }
    }
    Ok(counts)
}

/// `(r + s) / (q + r + s)`, or 0 when neither vector has a 1.
pub fn pair_dissimilarity(counts: ContingencyCounts) -> f64 {
    let denom = counts.q + counts.r + counts.s;
    if denom == 0 {
        0.0
    } else {
        (counts.r + counts.s) as f64 / denom as f64
    }
}

/// Symmetric dissimilarity matrix over the members of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    size: usize,
    cells: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.cells[i * self.size..(i + 1) * self.size]
    }

    /// Writes the matrix as CSV, labelling rows and columns with `ids`.
    pub fn write_csv<W: Write>(&self, ids: &[u64], out: W) -> Result<(), csv::Error> {
        assert_eq!(ids.len(), self.size, "one id per member");
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["session_id".to_string()];
        header.extend(ids.iter().map(u64::to_string));
        writer.write_record(&header)?;
        for (i, id) in ids.iter().enumerate() {
            let mut record = vec![id.to_string()];
            record.extend(self.row(i).iter().map(|d| format!("{d:.6}")));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// SDM for the given rows of `matrix`, in member order.
pub fn build_sdm(matrix: &SessionMatrix, members: &[usize]) -> DissimilarityMatrix {
    let size = members.len();
    let mut cells = vec![0.0; size * size];
    for a in 0..size {
        for b in a + 1..size {
            let counts = contingency(matrix.row(members[a]), matrix.row(members[b]))
                .expect("rows of one matrix share a dimension");
            let d = pair_dissimilarity(counts);
            cells[a * size + b] = d;
            cells[b * size + a] = d;
        }
    }
    DissimilarityMatrix { size, cells }
}

/// Outcome of knocking out one cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Knockout {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    /// Over-threshold partner count of each member, in member order.
    pub counts: Vec<usize>,
}

/// Counts, for each member, how many others lie strictly further than
/// `threshold`; members whose count exceeds `count_limit` are removed.
pub fn knockout(
    sdm: &DissimilarityMatrix,
    members: &[usize],
    threshold: f64,
    count_limit: usize,
) -> Knockout {
    assert_eq!(sdm.size(), members.len(), "sdm built over these members");
    let counts: Vec<usize> = (0..members.len())
        .map(|i| {
            sdm.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &d)| j != i && d > threshold)
                .count()
        })
        .collect();
    let (kept, removed) = members
        .iter()
        .zip(&counts)
        .partition::<Vec<_>, _>(|&(_, &c)| c <= count_limit);
    Knockout {
        kept: kept.into_iter().map(|(&m, _)| m).collect(),
        removed: removed.into_iter().map(|(&m, _)| m).collect(),
        counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KraParams {
    pub threshold: f64,
    pub count_limit: usize,
}

impl Default for KraParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            count_limit: DEFAULT_COUNT_LIMIT,
        }
    }
}

impl KraParams {
    pub fn new(threshold: f64, count_limit: usize) -> Result<Self, KraError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(KraError::BadThreshold(threshold));
        }
        Ok(Self {
            threshold,
            count_limit,
        })
    }
}

/// Per-cluster record of what refinement did, keyed by session id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRefinement {
    pub cluster: usize,
    pub kept: Vec<u64>,
    pub removed: Vec<u64>,
    pub counts: BTreeMap<u64, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub params: KraParams,
    pub clusters: Vec<ClusterRefinement>,
}

impl RefinementReport {
    pub fn removed_count(&self) -> usize {
        self.clusters.iter().map(|c| c.removed.len()).sum()
    }
}

/// Refines every cluster independently. The result has the same `k`; knocked
/// out rows become unassigned and clusters may end up empty.
pub fn refine(
    matrix: &SessionMatrix,
    clustering: &Clustering,
    params: KraParams,
) -> (Clustering, RefinementReport) {
    assert_eq!(clustering.len(), matrix.n_rows(), "clustering covers the matrix");
    let ids = matrix.row_ids();
    let mut labels = clustering.labels().to_vec();
    let mut clusters = Vec::with_capacity(clustering.k());

    for (cluster, members) in clustering.members().into_iter().enumerate() {
        let sdm = build_sdm(matrix, &members);
        let outcome = knockout(&sdm, &members, params.threshold, params.count_limit);
        for &row in &outcome.removed {
            labels[row] = None;
        }
        clusters.push(ClusterRefinement {
            cluster,
            kept: outcome.kept.iter().map(|&r| ids[r]).collect(),
            removed: outcome.removed.iter().map(|&r| ids[r]).collect(),
            counts: members
                .iter()
                .zip(&outcome.counts)
                .map(|(&r, &c)| (ids[r], c))
                .collect(),
        });
    }

    let refined = Clustering::new(clustering.k(), labels, Method::Refined)
        .expect("labels are a subset of a valid clustering");
    (refined, RefinementReport { params, clusters })
}
