//! Clustering of web-usage sessions with knockout refinement.
//!
//! The pipeline runs from raw page-view logs to quality measures:
//!
//! 1. [`ingest`] parses `timestamp,visitor_id,url` logs, cuts sessions on a
//!    30 minute inactivity timeout, drops sessions longer than two hours or
//!    shorter than three views, and drops pages viewed five times or fewer.
//! 2. [`matrix`] turns the surviving sessions into a binary session x page
//!    matrix.
//! 3. [`kmeans`] and [`som`] cluster the matrix rows.
//! 4. [`kra`] refines each cluster by knocking out sessions that are
//!    dissimilar to too many of their cluster-mates.
//! 5. [`metrics`] scores original and refined clusterings with the
//!    Davies-Bouldin and Dunn indices and with precision, recall and F.
//!
//! ```
//! use kra_core::{kmeans, kra, metrics, synth};
//!
//! let fixture = synth::planted_noise(3, 20);
//! let run = kmeans::kmeans_run(&fixture.matrix, kmeans::KMeansParams::new(3, 1)).unwrap();
//! let (refined, report) = kra::refine(&fixture.matrix, &run.clustering, kra::KraParams::default());
//!
//! let before = metrics::dunn_index(&fixture.matrix, &run.clustering).unwrap();
//! let after = metrics::dunn_index(&fixture.matrix, &refined).unwrap();
//! assert!(after >= before);
//! assert_eq!(report.removed_count(), 6);
//! ```
//!
//! A longer walkthrough lives in the `book/` directory at the repository root.

pub mod clustering;
pub mod ingest;
pub mod kmeans;
pub mod kra;
pub mod matrix;
pub mod metrics;
pub mod som;
pub mod synth;

pub use clustering::{Clustering, Method};
pub use matrix::{PageCatalog, SessionMatrix};

// The book's code listings run as doc tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    pub struct Preprocessing;
    #[doc = include_str!("../../../book/src/session-matrix.md")]
    pub struct SessionMatrix;
    #[doc = include_str!("../../../book/src/kmeans.md")]
    pub struct KMeans;
    #[doc = include_str!("../../../book/src/som.md")]
    pub struct Som;
    #[doc = include_str!("../../../book/src/knockout.md")]
    pub struct Knockout;
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
