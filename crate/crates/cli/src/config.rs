//! Command-line flags, the optional TOML config file, and the resolved
//! per-subcommand configs. Precedence: flag, then config file, then (for the
//! seed only) the `KRA_SEED` environment variable, then the built-in default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use kra_core::ingest::{
    SessionLimits, DEFAULT_MIN_PAGE_FREQUENCY, DEFAULT_MIN_VIEWS,
};
use kra_core::kmeans::DEFAULT_MAX_ITER;
use kra_core::kra::{KraParams, DEFAULT_COUNT_LIMIT, DEFAULT_THRESHOLD};
use kra_core::metrics::Linkage;

use crate::UsageError;

pub const SEED_ENV: &str = "KRA_SEED";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_K: usize = 10;
const DEFAULT_TIMEOUT_MIN: u64 = 30;
const DEFAULT_MAX_SESSION_HOURS: u64 = 2;

#[derive(Debug, Parser)]
#[command(name = "kra", version, about = "Cluster web sessions, refine clusters by knockout, compare quality")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a `timestamp,visitor_id,url` log into a binary session matrix.
    Preprocess(PreprocessArgs),
    /// Cluster the session matrix, refine the clusters and write metrics.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Page-view log (CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Inactivity timeout in minutes [default: 30].
    #[arg(long)]
    pub timeout_min: Option<u64>,
    /// Sessions longer than this many hours are dropped [default: 2].
    #[arg(long)]
    pub max_session_hours: Option<u64>,
    /// Minimum page views per session [default: 3].
    #[arg(long)]
    pub min_views: Option<usize>,
    /// Minimum total views per page [default: 6].
    #[arg(long)]
    pub min_page_freq: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Output directory (also where `matrix.csv` is looked up by default).
    #[arg(long)]
    pub out: PathBuf,
    /// Session matrix CSV [default: <out>/matrix.csv].
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Number of clusters (neurons for SOM) [default: 10].
    #[arg(long)]
    pub k: Option<usize>,
    /// SOM lattice as ROWSxCOLS; overrides --k for SOM.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// RNG seed [default: $KRA_SEED, else 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dissimilarity above which a pair counts against both sessions [default: 0.3].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Sessions with more over-threshold partners than this are removed [default: 2].
    #[arg(long)]
    pub count_limit: Option<usize>,
    /// `session_id,class` CSV for precision/recall/F.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Also write each cluster's dissimilarity matrix.
    #[arg(long)]
    pub dump_sdm: bool,
    /// Run k = 10, 15 and 20.
    #[arg(long, conflicts_with_all = ["k", "grid"])]
    pub sweep: bool,
    /// K-Means iteration cap [default: 100].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Between-cluster distance for the Davies-Bouldin index [default: average].
    #[arg(long, value_enum)]
    pub linkage: Option<LinkageArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[value(name = "kmeans")]
    #[serde(rename = "kmeans")]
    KMeans,
    Som,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Som => "som",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageArg {
    Average,
    Centroid,
}

impl From<LinkageArg> for Linkage {
    fn from(l: LinkageArg) -> Self {
        match l {
            LinkageArg::Average => Linkage::Average,
            LinkageArg::Centroid => Linkage::Centroid,
        }
    }
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let parse = |v: &str| usize::from_str(v.trim()).map_err(|e| format!("{v:?}: {e}"));
    let shape = (parse(r)?, parse(c)?);
    if shape.0 == 0 || shape.1 == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok(shape)
}

/// Keys accepted in a `--config` TOML file. All optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub timeout_min: Option<u64>,
    pub max_session_hours: Option<u64>,
    pub min_views: Option<usize>,
    pub min_page_freq: Option<u64>,
    pub algorithm: Option<Algorithm>,
    pub k: Option<usize>,
    pub grid: Option<String>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub count_limit: Option<usize>,
    pub labels: Option<PathBuf>,
    pub max_iter: Option<usize>,
    pub linkage: Option<LinkageArg>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("reading config {}: {e}", path.display())))?;
        let parsed = toml::from_str(&text)
            .map_err(|e| UsageError(format!("parsing config {}: {e}", path.display())))?;
        Ok(parsed)
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub limits: SessionLimits,
    pub min_views: usize,
    pub min_page_frequency: u64,
}

impl PreprocessConfig {
    /// Default settings for `input` and `out`.
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            out: out.into(),
            limits: SessionLimits::default(),
            min_views: DEFAULT_MIN_VIEWS,
            min_page_frequency: DEFAULT_MIN_PAGE_FREQUENCY,
        }
    }

    pub fn resolve(args: PreprocessArgs) -> Result<Self> {
        let file = FileConfig::load(args.config.as_deref())?;
        let timeout_min = args.timeout_min.or(file.timeout_min).unwrap_or(DEFAULT_TIMEOUT_MIN);
        let hours = args
            .max_session_hours
            .or(file.max_session_hours)
            .unwrap_or(DEFAULT_MAX_SESSION_HOURS);
        let cfg = Self {
            input: args.input,
            out: args.out,
            limits: SessionLimits {
                timeout: timeout_min.saturating_mul(60),
                max_duration: hours.saturating_mul(3600),
            },
            min_views: args.min_views.or(file.min_views).unwrap_or(DEFAULT_MIN_VIEWS),
            min_page_frequency: args
                .min_page_freq
                .or(file.min_page_freq)
                .unwrap_or(DEFAULT_MIN_PAGE_FREQUENCY),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.limits.timeout == 0 {
            return Err(usage("--timeout-min must be positive"));
        }
        if self.limits.max_duration == 0 {
            return Err(usage("--max-session-hours must be positive"));
        }
        if self.min_views == 0 {
            return Err(usage("--min-views must be at least 1"));
        }
        if self.min_page_frequency == 0 {
            return Err(usage("--min-page-freq must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Matrix CSV; `<out>/matrix.csv` when `None`.
    pub input: Option<PathBuf>,
    pub algorithm: Algorithm,
    pub k: usize,
    pub grid: Option<(usize, usize)>,
    pub seed: u64,
    pub kra: KraParams,
    pub labels: Option<PathBuf>,
    pub dump_sdm: bool,
    pub sweep: bool,
    pub max_iter: usize,
    pub linkage: Linkage,
}

impl RunConfig {
    pub fn new(out: impl Into<PathBuf>, algorithm: Algorithm, k: usize, seed: u64) -> Self {
        Self {
            out: out.into(),
            input: None,
            algorithm,
            k,
            grid: None,
            seed,
            kra: KraParams::default(),
            labels: None,
            dump_sdm: false,
            sweep: false,
            max_iter: DEFAULT_MAX_ITER,
            linkage: Linkage::Average,
        }
    }

    /// Merges flags, config file and `env_seed` (the value of `KRA_SEED`).
    pub fn resolve(args: RunArgs, env_seed: Option<&str>) -> Result<Self> {
        let file = FileConfig::load(args.config.as_deref())?;
        let env_seed = env_seed
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| usage(format!("{SEED_ENV}={s:?}: {e}")))
            })
            .transpose()?;
        let file_grid = file
            .grid
            .as_deref()
            .map(parse_grid)
            .transpose()
            .map_err(|e| usage(format!("config grid: {e}")))?;
        let grid = if args.k.is_some() || args.sweep { args.grid } else { args.grid.or(file_grid) };
        let algorithm = args.algorithm.or(file.algorithm).unwrap_or(Algorithm::KMeans);
        let k = match (grid, algorithm) {
            (Some((r, c)), Algorithm::Som) => r * c,
            _ => args.k.or(file.k).unwrap_or(DEFAULT_K),
        };
        let threshold = args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
        let count_limit = args.count_limit.or(file.count_limit).unwrap_or(DEFAULT_COUNT_LIMIT);
        let cfg = Self {
            out: args.out,
            input: args.input,
            algorithm,
            k,
            grid,
            seed: args.seed.or(file.seed).or(env_seed).unwrap_or(DEFAULT_SEED),
            kra: KraParams::new(threshold, count_limit).map_err(|e| usage(format!("--threshold: {e}")))?,
            labels: args.labels.or(file.labels),
            dump_sdm: args.dump_sdm,
            sweep: args.sweep,
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(DEFAULT_MAX_ITER),
            linkage: args.linkage.or(file.linkage).map_or(Linkage::Average, Linkage::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(usage("--k must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(usage("--max-iter must be at least 1"));
        }
        if let Some((r, c)) = self.grid {
            if r == 0 || c == 0 {
                return Err(usage("--grid dimensions must be positive"));
            }
            if self.algorithm == Algorithm::KMeans {
                return Err(usage("--grid only applies to --algorithm som"));
            }
        }
        KraParams::new(self.kra.threshold, self.kra.count_limit)
            .map_err(|e| usage(format!("--threshold: {e}")))?;
        Ok(())
    }

    pub fn matrix_path(&self) -> PathBuf {
        self.input.clone().unwrap_or_else(|| self.out.join("matrix.csv"))
    }
}

/// Reads `KRA_SEED` from the process environment.
pub fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

/// Resolved form of a parsed command line.
pub enum Resolved {
    Preprocess(PreprocessConfig),
    Run(RunConfig),
}

impl Cli {
    pub fn resolve(self) -> Result<Resolved> {
        match self.command {
            Command::Preprocess(args) => Ok(Resolved::Preprocess(PreprocessConfig::resolve(args)?)),
            Command::Run(args) => Ok(Resolved::Run(
                RunConfig::resolve(args, env_seed().as_deref()).context("resolving run settings")?,
            )),
        }
    }
}
