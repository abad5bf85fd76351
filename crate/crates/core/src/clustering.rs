//! Partition of matrix rows into labelled clusters.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    KMeans,
    Som,
    Refined,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::KMeans => "kmeans",
            Method::Som => "som",
            Method::Refined => "refined",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusteringError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("row {row} has label {label}, but k = {k}")]
    LabelOutOfRange { row: usize, label: usize, k: usize },
}

/// Assignment of each row to one of `k` clusters.
///
/// A row may be unassigned (`None`); refinement leaves knocked-out sessions
/// unassigned rather than moving them elsewhere. Clusters may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    k: usize,
    labels: Vec<Option<usize>>,
    method: Method,
}

impl Clustering {
    pub fn new(k: usize, labels: Vec<Option<usize>>, method: Method) -> Result<Self, ClusteringError> {
        if k == 0 {
            return Err(ClusteringError::ZeroK);
        }
        for (row, label) in labels.iter().enumerate() {
            if let Some(label) = *label {
                if label >= k {
                    return Err(ClusteringError::LabelOutOfRange { row, label, k });
                }
            }
        }
        Ok(Self { k, labels, method })
    }

    /// Every row assigned.
    pub fn from_labels(k: usize, labels: &[usize], method: Method) -> Result<Self, ClusteringError> {
        Self::new(k, labels.iter().copied().map(Some).collect(), method)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, row: usize) -> Option<usize> {
        self.labels[row]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Row indices of each cluster, ascending. Always `k` entries.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (row, label) in self.labels.iter().enumerate() {
            if let Some(c) = label {
                members[*c].push(row);
            }
        }
        members
    }

    /// Member lists of the non-empty clusters only, in cluster order.
    pub fn non_empty_members(&self) -> Vec<Vec<usize>> {
        self.members().into_iter().filter(|m| !m.is_empty()).collect()
    }

    pub fn assigned_count(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    /// Writes `session_id,cluster` for every assigned row.
    pub fn write_assignments_csv<W: Write>(&self, row_ids: &[u64], out: W) -> Result<(), csv::Error> {
        assert_eq!(row_ids.len(), self.labels.len(), "one id per row");
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["session_id", "cluster"])?;
        for (id, label) in row_ids.iter().zip(&self.labels) {
            if let Some(c) = label {
                writer.write_record([id.to_string(), c.to_string()])?;
            }
        }
        writer.flush()?;
        Ok(())
    }
}
