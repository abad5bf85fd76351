//! Log ingestion and sessionization.
//!
//! Raw page-view records arrive as a three-column CSV (`timestamp,visitor_id,url`).
//! They are grouped into per-visitor sessions split on inactivity, and the
//! sessions are then cleaned: short sessions and rarely viewed pages are removed.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use thiserror::Error;

use crate::matrix::PageCatalog;

/// Inactivity gap (seconds) that closes a session.
pub const DEFAULT_TIMEOUT_SECS: u64 = 30 * 60;
/// Sessions spanning more than this many seconds are discarded.
pub const DEFAULT_MAX_DURATION_SECS: u64 = 2 * 60 * 60;
/// Sessions with fewer page views are discarded.
pub const DEFAULT_MIN_VIEWS: usize = 3;
/// Pages viewed fewer times than this (across all sessions) are discarded.
pub const DEFAULT_MIN_PAGE_FREQUENCY: u64 = 6;

/// Exact header expected on the input log.
pub const LOG_HEADER: [&str; 3] = ["timestamp", "visitor_id", "url"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty: missing header `timestamp,visitor_id,url`")]
    MissingHeader,
    #[error("unexpected header {found:?}, expected `timestamp,visitor_id,url`")]
    BadHeader { found: String },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One page request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageViewRecord {
    pub timestamp: u64,
    pub visitor_id: String,
    pub url: String,
}

/// Why a data row was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowProblem {
    WrongFieldCount(usize),
    BadTimestamp(String),
    EmptyField(&'static str),
    EmbeddedComma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: u64,
    pub problem: RowProblem,
}

/// Result of [`parse_log`]: valid records in file order plus rejected rows.
#[derive(Debug, Default, Clone)]
pub struct ParsedLog {
    pub records: Vec<PageViewRecord>,
    pub skipped: Vec<SkippedRow>,
}

/// Parses a page-view log. Bad rows are collected in [`ParsedLog::skipped`];
/// only a missing or wrong header (or an undecodable stream) is fatal.
pub fn parse_log<R: Read>(input: R) -> Result<ParsedLog, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);

    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(IngestError::MissingHeader),
        Some(row) => row.map_err(|source| IngestError::Csv { line: 1, source })?,
    };
    if header.iter().map(str::trim).ne(LOG_HEADER) {
        return Err(IngestError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut parsed = ParsedLog::default();
    for row in rows {
        let row = row.map_err(|source| {
            let line = source.position().map_or(0, |p| p.line());
            IngestError::Csv { line, source }
        })?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row) {
            Ok(record) => parsed.records.push(record),
            Err(problem) => parsed.skipped.push(SkippedRow { line, problem }),
        }
    }
    Ok(parsed)
}

fn parse_row(row: &csv::StringRecord) -> Result<PageViewRecord, RowProblem> {
    if row.len() != 3 {
        return Err(RowProblem::WrongFieldCount(row.len()));
    }
    let (ts, visitor, url) = (row[0].trim(), row[1].trim(), row[2].trim());
    // A quoted field may still smuggle a comma through the CSV layer.
    if visitor.contains(',') || url.contains(',') {
        return Err(RowProblem::EmbeddedComma);
    }
    let timestamp = ts
        .parse::<u64>()
        .map_err(|_| RowProblem::BadTimestamp(ts.to_string()))?;
    if visitor.is_empty() {
        return Err(RowProblem::EmptyField("visitor_id"));
    }
    if url.is_empty() {
        return Err(RowProblem::EmptyField("url"));
    }
    Ok(PageViewRecord {
        timestamp,
        visitor_id: visitor.to_string(),
        url: url.to_string(),
    })
}

/// A page view inside a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub timestamp: u64,
    pub url: String,
}

/// A time-ordered run of page views by a single visitor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: u64,
    pub visitor_id: String,
    pub views: Vec<View>,
}

impl Session {
    pub fn start(&self) -> u64 {
        self.views.first().map_or(0, |v| v.timestamp)
    }

    pub fn end(&self) -> u64 {
        self.views.last().map_or(0, |v| v.timestamp)
    }

    pub fn span(&self) -> u64 {
        self.end() - self.start()
    }
}

/// Time limits used to cut and discard sessions, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionLimits {
    pub timeout: u64,
    pub max_duration: u64,
}

impl Default for SessionLimits {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT_SECS,
            max_duration: DEFAULT_MAX_DURATION_SECS,
        }
    }
}

/// Groups records by visitor and splits each visitor's click stream wherever
/// two consecutive views are more than `timeout` seconds apart. Sessions whose
/// span exceeds `max_duration` are dropped. Surviving sessions are numbered from
/// 1 in (visitor_id, start time) order.
pub fn sessionize(
    records: &[PageViewRecord],
    limits: SessionLimits,
) -> Result<Vec<Session>, IngestError> {
    if limits.timeout == 0 {
        return Err(IngestError::NonPositive("timeout"));
    }
    if limits.max_duration == 0 {
        return Err(IngestError::NonPositive("max_duration"));
    }

    let mut by_visitor: BTreeMap<&str, Vec<&PageViewRecord>> = BTreeMap::new();
    for record in records {
        by_visitor
            .entry(record.visitor_id.as_str())
            .or_default()
            .push(record);
    }

    let mut sessions = Vec::new();
    for (visitor, mut hits) in by_visitor {
        // stable: equal timestamps keep file order
        hits.sort_by_key(|r| r.timestamp);

        let mut current: Vec<View> = Vec::new();
        let mut groups = Vec::new();
        for hit in hits {
            if let Some(last) = current.last() {
                if hit.timestamp - last.timestamp > limits.timeout {
                    groups.push(std::mem::take(&mut current));
                }
            }
            current.push(View {
                timestamp: hit.timestamp,
                url: hit.url.clone(),
            });
        }
        if !current.is_empty() {
            groups.push(current);
        }

        for views in groups {
            let span = views.last().unwrap().timestamp - views[0].timestamp;
            if span <= limits.max_duration {
                sessions.push(Session {
                    session_id: 0,
                    visitor_id: visitor.to_string(),
                    views,
                });
            }
        }
    }

    for (id, session) in sessions.iter_mut().enumerate() {
        session.session_id = id as u64 + 1;
    }
    Ok(sessions)
}

/// Keeps sessions with at least `min_views` page views.
pub fn filter_sessions(sessions: Vec<Session>, min_views: usize) -> Vec<Session> {
    sessions
        .into_iter()
        .filter(|s| s.views.len() >= min_views)
        .collect()
}

/// Drops every view of a page whose total view count is below `min_frequency`,
/// then drops sessions left without views. Single pass: the session-length
/// rule is not re-applied.
pub fn filter_pages(sessions: Vec<Session>, min_frequency: u64) -> (Vec<Session>, PageCatalog) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for view in sessions.iter().flat_map(|s| &s.views) {
        *counts.entry(view.url.as_str()).or_default() += 1;
    }
    let mut surviving: BTreeMap<String, u64> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_frequency)
        .map(|(u, c)| (u.to_string(), c))
        .collect();

    let sessions: Vec<Session> = sessions
        .into_iter()
        .filter_map(|mut s| {
            s.views.retain(|v| surviving.contains_key(&v.url));
            (!s.views.is_empty()).then_some(s)
        })
        .collect();

    let catalog = PageCatalog::from_counts(std::mem::take(&mut surviving))
        .expect("surviving page counts are positive and keys are unique");
    (sessions, catalog)
}

/// Writes sessions as `session_id,visitor_id,start,end,urls`, urls joined by `|`.
pub fn write_sessions_csv<W: Write>(sessions: &[Session], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["session_id", "visitor_id", "start", "end", "urls"])?;
    for s in sessions {
        let urls = s
            .views
            .iter()
            .map(|v| v.url.as_str())
            .collect::<Vec<_>>()
            .join("|");
        writer.write_record([
            s.session_id.to_string(),
            s.visitor_id.clone(),
            s.start().to_string(),
            s.end().to_string(),
            urls,
        ])?;
    }
    writer.flush()?;
    Ok(())
}
