//! Cluster quality measures.
//!
//! Internal measures (Davies-Bouldin, Dunn) use Euclidean distance between
//! matrix rows, the same distance the clustering algorithms use. External
//! measures (precision, recall, F) compare clusters to known class labels.
//! Empty clusters are ignored everywhere, so `K` is the number of non-empty
//! clusters.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Clustering;
use crate::matrix::SessionMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty member list")]
    EmptyCluster,
    #[error("need at least two non-empty clusters, found {0}")]
    TooFewClusters(usize),
    #[error("clusters {0} and {1} are at distance zero")]
    ZeroSeparation(usize, usize),
    #[error("every cluster has zero diameter")]
    ZeroDiameter,
    #[error("row {0} is clustered but has no class label")]
    Unlabelled(usize),
    #[error("labels cover {found} rows, clustering has {expected}")]
    LabelLength { found: usize, expected: usize },
    #[error("no row is assigned to a cluster")]
    NoAssignedRows,
}

/// Largest pairwise distance within `members`; 0 for a singleton.
pub fn diameter(matrix: &SessionMatrix, members: &[usize]) -> Result<f64, MetricsError> {
    if members.is_empty() {
        return Err(MetricsError::EmptyCluster);
    }
    let mut widest = 0.0f64;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            widest = widest.max(matrix.distance_unchecked(i, j));
        }
    }
    Ok(widest)
}

fn cross_distances<'a>(
    matrix: &'a SessionMatrix,
    a: &'a [usize],
    b: &'a [usize],
) -> Result<impl Iterator<Item = f64> + 'a, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCluster);
    }
    Ok(a.iter()
        .flat_map(move |&i| b.iter().map(move |&j| matrix.distance_unchecked(i, j))))
}

/// Mean distance over all cross pairs (average linkage).
pub fn avg_inter_distance(matrix: &SessionMatrix, a: &[usize], b: &[usize]) -> Result<f64, MetricsError> {
    let total: f64 = cross_distances(matrix, a, b)?.sum();
    Ok(total / (a.len() * b.len()) as f64)
}

/// Smallest distance over all cross pairs (single linkage).
pub fn min_inter_distance(matrix: &SessionMatrix, a: &[usize], b: &[usize]) -> Result<f64, MetricsError> {
    Ok(cross_distances(matrix, a, b)?.fold(f64::INFINITY, f64::min))
}

/// Distance between the mean vectors of two clusters.
pub fn centroid_distance(matrix: &SessionMatrix, a: &[usize], b: &[usize]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCluster);
    }
    let mean = |members: &[usize]| -> Vec<f64> {
        let mut sum = vec![0.0; matrix.n_cols()];
        for &i in members {
            for (s, &x) in sum.iter_mut().zip(matrix.row(i)) {
                *s += f64::from(x);
            }
        }
        sum.iter().map(|s| s / members.len() as f64).collect()
    };
    let (ma, mb) = (mean(a), mean(b));
    Ok(ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// How the between-cluster distance in the Davies-Bouldin ratio is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Centroid,
}

/// Davies-Bouldin index with average linkage. Lower is better.
pub fn db_index(matrix: &SessionMatrix, clustering: &Clustering) -> Result<f64, MetricsError> {
    db_index_with(matrix, clustering, Linkage::Average)
}

/// `DB = (1/K) * sum_i max_{j != i} (diam(C_i) + diam(C_j)) / d(C_i, C_j)`.
pub fn db_index_with(
    matrix: &SessionMatrix,
    clustering: &Clustering,
    linkage: Linkage,
) -> Result<f64, MetricsError> {
    let clusters = clustering.non_empty_members();
    let k = clusters.len();
    if k < 2 {
        return Err(MetricsError::TooFewClusters(k));
    }
    let diam = clusters
        .iter()
        .map(|c| diameter(matrix, c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut separation = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let d = match linkage {
                Linkage::Average => avg_inter_distance(matrix, &clusters[i], &clusters[j])?,
                Linkage::Centroid => centroid_distance(matrix, &clusters[i], &clusters[j])?,
            };
            if d == 0.0 {
                return Err(MetricsError::ZeroSeparation(i, j));
            }
            separation[i * k + j] = d;
            separation[j * k + i] = d;
        }
    }

    let total: f64 = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (diam[i] + diam[j]) / separation[i * k + j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    Ok(total / k as f64)
}

/// Dunn index: smallest single-linkage distance between clusters over the
/// largest cluster diameter. Higher is better.
pub fn dunn_index(matrix: &SessionMatrix, clustering: &Clustering) -> Result<f64, MetricsError> {
    let clusters = clustering.non_empty_members();
    let k = clusters.len();
    if k < 2 {
        return Err(MetricsError::TooFewClusters(k));
    }
    let mut widest = 0.0f64;
    for c in &clusters {
        widest = widest.max(diameter(matrix, c)?);
    }
    if widest == 0.0 {
        return Err(MetricsError::ZeroDiameter);
    }
    let mut closest = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            closest = closest.min(min_inter_distance(matrix, &clusters[i], &clusters[j])?);
        }
    }
    Ok(closest / widest)
}

/// Ground-truth class of each matrix row (`None` for rows without a class).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLabels {
    classes: Vec<Option<String>>,
}

impl ClassLabels {
    pub fn new(classes: Vec<Option<String>>) -> Self {
        Self { classes }
    }

    pub fn from_classes<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Self {
        Self::new(classes.into_iter().map(|c| Some(c.into())).collect())
    }

    /// Aligns a `session_id -> class` map with the rows of `matrix`.
    pub fn for_matrix(matrix: &SessionMatrix, by_session: &HashMap<u64, String>) -> Self {
        Self::new(
            matrix
                .row_ids()
                .iter()
                .map(|id| by_session.get(id).cloned())
                .collect(),
        )
    }

    pub fn get(&self, row: usize) -> Option<&str> {
        self.classes.get(row).and_then(|c| c.as_deref())
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Precision, recall and F for one (class, cluster) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub class: String,
    pub cluster: usize,
    pub overlap: usize,
    pub class_size: usize,
    pub cluster_size: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMeasures {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub table: Vec<PairScore>,
}

/// `2PR / (P + R)`, 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Class-vs-cluster precision, recall and F.
///
/// For class `i` and cluster `j`: `R = x_ij / x_i`, `P = x_ij / x_j`. The
/// overall F is `sum_i (x_i / n) * max_j F(i, j)`; overall precision and recall
/// are weighted the same way, taken at each class's best-F cluster (lowest
/// cluster index on ties). Only assigned rows count towards `n`, `x_i` and `x_j`.
pub fn external_measures(
    clustering: &Clustering,
    labels: &ClassLabels,
) -> Result<ExternalMeasures, MetricsError> {
    if labels.len() != clustering.len() {
        return Err(MetricsError::LabelLength {
            found: labels.len(),
            expected: clustering.len(),
        });
    }
    let mut class_size: BTreeMap<&str, usize> = BTreeMap::new();
    let mut overlap: BTreeMap<(&str, usize), usize> = BTreeMap::new();
    let mut cluster_size = vec![0usize; clustering.k()];
    for (row, label) in clustering.labels().iter().enumerate() {
        let Some(cluster) = *label else { continue };
        let class = labels.get(row).ok_or(MetricsError::Unlabelled(row))?;
        *class_size.entry(class).or_default() += 1;
        *overlap.entry((class, cluster)).or_default() += 1;
        cluster_size[cluster] += 1;
    }
    let n: usize = class_size.values().sum();
    if n == 0 {
        return Err(MetricsError::NoAssignedRows);
    }

    let mut table = Vec::new();
    let (mut precision, mut recall, mut f_measure) = (0.0, 0.0, 0.0);
    for (&class, &x_i) in &class_size {
        let mut best: Option<(f64, f64, f64)> = None;
        for (cluster, &x_j) in cluster_size.iter().enumerate().filter(|(_, &s)| s > 0) {
            let x_ij = overlap.get(&(class, cluster)).copied().unwrap_or(0);
            let p = x_ij as f64 / x_j as f64;
            let r = x_ij as f64 / x_i as f64;
            let f = f_score(p, r);
            if best.is_none_or(|(bf, _, _)| f > bf) {
                best = Some((f, p, r));
            }
            table.push(PairScore {
                class: class.to_string(),
                cluster,
                overlap: x_ij,
                class_size: x_i,
                cluster_size: x_j,
                precision: p,
                recall: r,
                f_measure: f,
            });
        }
        let (f, p, r) = best.expect("a labelled row sits in some non-empty cluster");
        let weight = x_i as f64 / n as f64;
        f_measure += weight * f;
        precision += weight * p;
        recall += weight * r;
    }

    Ok(ExternalMeasures {
        precision,
        recall,
        f_measure,
        table,
    })
}

/// All measures for one clustering. A measure that cannot be computed is
/// `None` and the reason is listed in `issues`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k_effective: usize,
    pub sessions: usize,
    pub db: Option<f64>,
    pub dunn: Option<f64>,
    pub external: Option<ExternalMeasures>,
    pub issues: Vec<String>,
}

impl MetricsReport {
    pub fn precision(&self) -> Option<f64> {
        self.external.as_ref().map(|e| e.precision)
    }

    pub fn recall(&self) -> Option<f64> {
        self.external.as_ref().map(|e| e.recall)
    }

    pub fn f_measure(&self) -> Option<f64> {
        self.external.as_ref().map(|e| e.f_measure)
    }
}

pub fn evaluate(
    matrix: &SessionMatrix,
    clustering: &Clustering,
    labels: Option<&ClassLabels>,
    linkage: Linkage,
) -> MetricsReport {
    let mut issues = Vec::new();
    let mut keep = |name: &str, r: Result<f64, MetricsError>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            issues.push(format!("{name}: {e}"));
            None
        }
    };
    let db = keep("db", db_index_with(matrix, clustering, linkage));
    let dunn = keep("dunn", dunn_index(matrix, clustering));
    let external = labels.and_then(|l| match external_measures(clustering, l) {
        Ok(e) => Some(e),
        Err(e) => {
            issues.push(format!("external: {e}"));
            None
        }
    });
    MetricsReport {
        k_effective: clustering.non_empty_members().len(),
        sessions: clustering.assigned_count(),
        db,
        dunn,
        external,
        issues,
    }
}
