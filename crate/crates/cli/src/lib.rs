//! The `kra` pipeline: preprocess a web log into a session matrix, cluster it,
//! refine the clusters and compare quality measures before and after.
//!
//! Both subcommands are plain functions over a config struct so they can be
//! driven from tests as well as from `main`.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use kra_core::ingest;
use kra_core::kmeans::{self, KMeansParams};
use kra_core::kra;
use kra_core::matrix::{self, SessionMatrix};
use kra_core::metrics::{self, ClassLabels, MetricsReport};
use kra_core::som::{self, SomGrid, SomSchedule};
use kra_core::Clustering;

pub mod config;
pub mod fixtures;

pub use config::{Algorithm, PreprocessConfig, RunConfig};

/// Cluster counts used by `--sweep`.
pub const SWEEP_KS: [usize; 3] = [10, 15, 20];

/// Bad flags or configuration; maps to exit code 1. Every other error is a
/// data error (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.is::<UsageError>() {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessSummary {
    pub records: usize,
    pub skipped_rows: usize,
    pub sessions: usize,
    pub sessions_after_view_filter: usize,
    pub sessions_kept: usize,
    pub pages_seen: usize,
    pub pages_kept: usize,
}

impl fmt::Display for PreprocessSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        writeln!(f, "records parsed:        {} ({} rows skipped)", self.records, self.skipped_rows)?;
        writeln!(f, "sessions:              {}", self.sessions)?;
        writeln!(
            f,
            "after min-views:       {} ({:.1}%)",
            self.sessions_after_view_filter,
            pct(self.sessions_after_view_filter, self.sessions)
        )?;
        writeln!(
            f,
            "after page filter:     {} ({:.1}%)",
            self.sessions_kept,
            pct(self.sessions_kept, self.sessions)
        )?;
        write!(f, "pages kept:            {} of {}", self.pages_kept, self.pages_seen)
    }
}

/// Parses the log, builds sessions, applies the session and page filters and
/// writes `matrix.csv` and `sessions.csv` into the output directory.
pub fn cmd_preprocess(cfg: &PreprocessConfig) -> Result<PreprocessSummary> {
    cfg.validate()?;
    let file = File::open(&cfg.input).with_context(|| format!("opening {}", cfg.input.display()))?;
    let parsed = ingest::parse_log(BufReader::new(file))
        .with_context(|| format!("reading {}", cfg.input.display()))?;
    for skip in &parsed.skipped {
        eprintln!("warning: {}:{}: skipped row ({:?})", cfg.input.display(), skip.line, skip.problem);
    }

    let sessions = ingest::sessionize(&parsed.records, cfg.limits)?;
    let n_sessions = sessions.len();
    let pages_seen = {
        let mut urls: Vec<&str> = parsed.records.iter().map(|r| r.url.as_str()).collect();
        urls.sort_unstable();
        urls.dedup();
        urls.len()
    };
    let sessions = ingest::filter_sessions(sessions, cfg.min_views);
    let after_views = sessions.len();
    let (sessions, catalog) = ingest::filter_pages(sessions, cfg.min_page_frequency);
    let matrix = matrix::build_matrix(&sessions, &catalog)?;

    if matrix.is_empty() {
        eprintln!("warning: no sessions survived preprocessing; writing an empty matrix");
    }

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_file(&cfg.out.join("matrix.csv"), |w| Ok(matrix.write_csv(w)?))?;
    write_file(&cfg.out.join("sessions.csv"), |w| Ok(ingest::write_sessions_csv(&sessions, w)?))?;

    Ok(PreprocessSummary {
        records: parsed.records.len(),
        skipped_rows: parsed.skipped.len(),
        sessions: n_sessions,
        sessions_after_view_filter: after_views,
        sessions_kept: sessions.len(),
        pages_seen,
        pages_kept: catalog.len(),
    })
}

/// What one clustering run produced, for printing.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub k: usize,
    pub original: MetricsReport,
    pub refined: MetricsReport,
    pub removed: usize,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} k={}: knocked out {} of {} sessions", self.algorithm, self.k, self.removed, self.original.sessions)?;
        for (name, a, b) in comparison_rows(&self.original, &self.refined) {
            writeln!(f, "  {name:<10} {a:>10} {b:>10}")?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct KMeansSidecar {
    algorithm: &'static str,
    k: usize,
    seed: u64,
    max_iter: usize,
    iterations: usize,
    converged: bool,
    objective: f64,
}

#[derive(Serialize)]
struct SomSidecar {
    algorithm: &'static str,
    grid: [usize; 2],
    k: usize,
    seed: u64,
    schedule: SomSchedule,
}

#[derive(Serialize)]
struct MetricsPair<'a> {
    original: &'a MetricsReport,
    refined: &'a MetricsReport,
}

/// Clusters the matrix (once per k when sweeping), refines the clusters and
/// writes assignments, the refinement report and metric comparisons.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let matrix_path = cfg.matrix_path();
    let file = File::open(&matrix_path).with_context(|| format!("opening {}", matrix_path.display()))?;
    let matrix = SessionMatrix::read_csv(BufReader::new(file))
        .with_context(|| format!("reading {}", matrix_path.display()))?;
    if matrix.is_empty() {
        bail!("{} has no sessions to cluster", matrix_path.display());
    }
    let labels = match &cfg.labels {
        Some(path) => Some(read_labels(path, &matrix)?),
        None => None,
    };

    let ks: Vec<usize> = if cfg.sweep { SWEEP_KS.to_vec() } else { vec![cfg.k] };
    // compute everything before touching the output directory
    let runs = ks
        .iter()
        .map(|&k| run_one(cfg, &matrix, labels.as_ref(), k))
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut summaries = Vec::new();
    for run in runs {
        let mut files = Vec::new();
        for (name, bytes) in &run.artifacts {
            let path = cfg.out.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            files.push(path);
        }
        summaries.push(RunSummary {
            files,
            ..run.summary
        });
    }
    Ok(summaries)
}

struct RunOutput {
    summary: RunSummary,
    artifacts: Vec<(String, Vec<u8>)>,
}

fn run_one(cfg: &RunConfig, matrix: &SessionMatrix, labels: Option<&ClassLabels>, k: usize) -> Result<RunOutput> {
    let stem = format!("{}-k{k}", cfg.algorithm);
    let mut artifacts = Vec::new();

    let original: Clustering = match cfg.algorithm {
        Algorithm::KMeans => {
            let params = KMeansParams {
                k,
                seed: cfg.seed,
                max_iter: cfg.max_iter,
            };
            let run = kmeans::kmeans_run(matrix, params).context("k-means")?;
            let sidecar = KMeansSidecar {
                algorithm: "kmeans",
                k,
                seed: cfg.seed,
                max_iter: cfg.max_iter,
                iterations: run.iterations,
                converged: run.converged,
                objective: run.objective(),
            };
            artifacts.push((format!("assignments-{stem}.json"), to_json(&sidecar)?));
            run.clustering
        }
        Algorithm::Som => {
            let (rows, cols) = match cfg.grid {
                Some(shape) if !cfg.sweep => shape,
                _ => som::default_grid_shape(k),
            };
            let schedule = SomSchedule::default_for(rows, cols, matrix.n_rows());
            let grid = SomGrid::random(rows, cols, matrix.n_cols(), cfg.seed)?
                .train(matrix, &schedule, cfg.seed)?;
            let clustering = grid.clustering(matrix)?;
            let sidecar = SomSidecar {
                algorithm: "som",
                grid: [rows, cols],
                k: clustering.k(),
                seed: cfg.seed,
                schedule,
            };
            artifacts.push((format!("assignments-{stem}.json"), to_json(&sidecar)?));
            artifacts.push((format!("som-grid-{stem}.json"), to_json(&grid)?));
            clustering
        }
    };

    let (refined, report) = kra::refine(matrix, &original, cfg.kra);
    let before = metrics::evaluate(matrix, &original, labels, cfg.linkage);
    let after = metrics::evaluate(matrix, &refined, labels, cfg.linkage);
    for issue in before.issues.iter().map(|i| ("original", i)).chain(after.issues.iter().map(|i| ("refined", i))) {
        eprintln!("warning: {stem} {}: {}", issue.0, issue.1);
    }

    let ids = matrix.row_ids();
    artifacts.push((format!("assignments-{stem}.csv"), to_bytes(|w| Ok(original.write_assignments_csv(ids, w)?))?));
    artifacts.push((format!("assignments-{stem}-refined.csv"), to_bytes(|w| Ok(refined.write_assignments_csv(ids, w)?))?));
    artifacts.push((format!("refinement-{stem}.json"), to_json(&report)?));
    artifacts.push((format!("metrics-{stem}.csv"), comparison_csv(&before, &after)?));
    artifacts.push((
        format!("metrics-{stem}.json"),
        to_json(&MetricsPair {
            original: &before,
            refined: &after,
        })?,
    ));

    if cfg.dump_sdm {
        for (c, members) in original.members().iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let sdm = kra::build_sdm(matrix, members);
            let member_ids: Vec<u64> = members.iter().map(|&r| ids[r]).collect();
            artifacts.push((
                format!("sdm-{stem}/cluster-{c}.csv"),
                to_bytes(|w| Ok(sdm.write_csv(&member_ids, w)?))?,
            ));
        }
    }

    Ok(RunOutput {
        summary: RunSummary {
            algorithm: cfg.algorithm,
            k,
            removed: report.removed_count(),
            original: before,
            refined: after,
            files: Vec::new(),
        },
        artifacts,
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn comparison_rows(a: &MetricsReport, b: &MetricsReport) -> Vec<(&'static str, String, String)> {
    vec![
        ("db", fmt_metric(a.db), fmt_metric(b.db)),
        ("dunn", fmt_metric(a.dunn), fmt_metric(b.dunn)),
        ("precision", fmt_metric(a.precision()), fmt_metric(b.precision())),
        ("recall", fmt_metric(a.recall()), fmt_metric(b.recall())),
        ("f_measure", fmt_metric(a.f_measure()), fmt_metric(b.f_measure())),
        ("k_effective", a.k_effective.to_string(), b.k_effective.to_string()),
        ("sessions", a.sessions.to_string(), b.sessions.to_string()),
    ]
}

/// `metric,original,refined` table; unavailable values are written as `NA`.
pub fn comparison_csv(original: &MetricsReport, refined: &MetricsReport) -> Result<Vec<u8>> {
    to_bytes(|w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(["metric", "original", "refined"])?;
        for (name, a, b) in comparison_rows(original, refined) {
            writer.write_record([name, a.as_str(), b.as_str()])?;
        }
        writer.flush()?;
        Ok(())
    })
}

/// Reads `session_id,class` rows and aligns them with the matrix.
pub fn read_labels(path: &Path, matrix: &SessionMatrix) -> Result<ClassLabels> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["session_id", "class"] {
        bail!("{}: expected header `session_id,class`", path.display());
    }
    let mut by_session = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id: u64 = record[0]
            .parse()
            .with_context(|| format!("{}:{line}: bad session id {:?}", path.display(), &record[0]))?;
        by_session.insert(id, record[1].to_string());
    }
    Ok(ClassLabels::for_matrix(matrix, &by_session))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
