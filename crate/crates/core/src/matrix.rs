//! The binary session × page matrix.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use thiserror::Error;

use crate::ingest::Session;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("session {session_id} references url {url:?} which is not in the page catalog")]
    UnknownUrl { session_id: u64, url: String },
    #[error("session {0} has no page views")]
    EmptySession(u64),
    #[error("duplicate session id {0}")]
    DuplicateRow(u64),
    #[error("page catalog urls must be strictly sorted and unique ({0:?} out of order)")]
    UnsortedCatalog(String),
    #[error("page {0:?} has zero frequency")]
    ZeroFrequency(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RowLength {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("row {row} column {col}: cell value {value} is not 0 or 1")]
    NotBinary { row: usize, col: usize, value: String },
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("matrix csv: missing or malformed header")]
    BadHeader,
    #[error("matrix csv line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Surviving pages in lexicographic order with their total view counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageCatalog {
    urls: Vec<String>,
    frequency: Vec<u64>,
}

impl PageCatalog {
    pub fn new(urls: Vec<String>, frequency: Vec<u64>) -> Result<Self, MatrixError> {
        assert_eq!(urls.len(), frequency.len(), "one frequency per url");
        for pair in urls.windows(2) {
            if pair[0] >= pair[1] {
                return Err(MatrixError::UnsortedCatalog(pair[1].clone()));
            }
        }
        if let Some(i) = frequency.iter().position(|&f| f == 0) {
            return Err(MatrixError::ZeroFrequency(urls[i].clone()));
        }
        Ok(Self { urls, frequency })
    }

    pub fn from_counts(counts: BTreeMap<String, u64>) -> Result<Self, MatrixError> {
        let (urls, frequency) = counts.into_iter().unzip();
        Self::new(urls, frequency)
    }

    pub fn urls(&self) -> &[String] {
        &self.urls
    }

    pub fn frequency(&self, col: usize) -> u64 {
        self.frequency[col]
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }

    pub fn position(&self, url: &str) -> Option<usize> {
        self.urls.binary_search_by(|u| u.as_str().cmp(url)).ok()
    }
}

/// Binary presence matrix: `cell(i, j) == 1` iff session `i` viewed page `j`.
///
/// Immutable once built. Rows are stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionMatrix {
    row_ids: Vec<u64>,
    col_ids: Vec<String>,
    cells: Vec<u8>,
}

impl SessionMatrix {
    /// Builds a matrix from explicit rows. Cells must be 0 or 1 and row ids unique.
    ///
    /// Unlike [`build_matrix`], all-zero rows are accepted here so that small
    /// hand-made instances can be expressed directly.
    pub fn from_rows(
        row_ids: Vec<u64>,
        col_ids: Vec<String>,
        rows: &[Vec<u8>],
    ) -> Result<Self, MatrixError> {
        assert_eq!(row_ids.len(), rows.len(), "one id per row");
        let m = col_ids.len();
        let mut seen = HashSet::with_capacity(row_ids.len());
        for &id in &row_ids {
            if !seen.insert(id) {
                return Err(MatrixError::DuplicateRow(id));
            }
        }
        let mut cells = Vec::with_capacity(rows.len() * m);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(MatrixError::RowLength {
                    row: r,
                    found: row.len(),
                    expected: m,
                });
            }
            if let Some(c) = row.iter().position(|&v| v > 1) {
                return Err(MatrixError::NotBinary {
                    row: r,
                    col: c,
                    value: row[c].to_string(),
                });
            }
            cells.extend_from_slice(row);
        }
        Ok(Self {
            row_ids,
            col_ids,
            cells,
        })
    }

    /// Convenience for tests and examples: rows numbered `0..n`, columns `p0..p{m-1}`.
    pub fn from_binary_rows(rows: &[Vec<u8>]) -> Result<Self, MatrixError> {
        let m = rows.first().map_or(0, Vec::len);
        Self::from_rows(
            (0..rows.len() as u64).collect(),
            (0..m).map(|j| format!("p{j}")).collect(),
            rows,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let m = self.n_cols();
        &self.cells[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn cell(&self, i: usize, j: usize) -> u8 {
        self.row(i)[j]
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    /// Euclidean distance between rows `i` and `j`.
    pub fn row_distance(&self, i: usize, j: usize) -> Result<f64, MatrixError> {
        for index in [i, j] {
            if index >= self.n_rows() {
                return Err(MatrixError::RowOutOfRange {
                    index,
                    rows: self.n_rows(),
                });
            }
        }
        Ok(self.distance_unchecked(i, j))
    }

    /// Euclidean distance between rows that are known to be in range.
    pub(crate) fn distance_unchecked(&self, i: usize, j: usize) -> f64 {
        // for 0/1 entries the squared distance is the Hamming distance
        let differing = self
            .row(i)
            .iter()
            .zip(self.row(j))
            .filter(|(a, b)| a != b)
            .count();
        (differing as f64).sqrt()
    }

    /// Writes `session_id,<url_1>,...,<url_m>` followed by one 0/1 row per session.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MatrixError> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["session_id"];
        header.extend(self.col_ids.iter().map(String::as_str));
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_cols() + 1);
        for (i, id) in self.row_ids.iter().enumerate() {
            record.clear();
            record.push(id.to_string());
            record.extend(self.row(i).iter().map(u8::to_string));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the format produced by [`SessionMatrix::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self, MatrixError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(input);
        let mut records = reader.records();
        let header = records.next().ok_or(MatrixError::BadHeader)??;
        if header.get(0) != Some("session_id") {
            return Err(MatrixError::BadHeader);
        }
        let col_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();

        let mut row_ids = Vec::new();
        let mut rows = Vec::new();
        for record in records {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| MatrixError::BadRow { line, message };
            let id = record[0]
                .parse::<u64>()
                .map_err(|_| bad(format!("bad session id {:?}", &record[0])))?;
            let row = record
                .iter()
                .skip(1)
                .map(|v| match v {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(bad(format!("cell {other:?} is not 0 or 1"))),
                })
                .collect::<Result<Vec<u8>, _>>()?;
            row_ids.push(id);
            rows.push(row);
        }
        Self::from_rows(row_ids, col_ids, &rows)
    }
}

/// Builds the presence matrix for `sessions` over the columns of `catalog`.
///
/// Every session must have at least one view and every viewed url must be in
/// the catalog, so each resulting row contains at least one 1.
pub fn build_matrix(
    sessions: &[Session],
    catalog: &PageCatalog,
) -> Result<SessionMatrix, MatrixError> {
    let columns: HashMap<&str, usize> = catalog
        .urls()
        .iter()
        .enumerate()
        .map(|(j, u)| (u.as_str(), j))
        .collect();
    let m = catalog.len();
    let mut rows = Vec::with_capacity(sessions.len());
    for s in sessions {
        if s.views.is_empty() {
            return Err(MatrixError::EmptySession(s.session_id));
        }
        let mut row = vec![0u8; m];
        for view in &s.views {
            let j = *columns
                .get(view.url.as_str())
                .ok_or_else(|| MatrixError::UnknownUrl {
                    session_id: s.session_id,
                    url: view.url.clone(),
                })?;
            row[j] = 1;
        }
        rows.push(row);
    }
    SessionMatrix::from_rows(
        sessions.iter().map(|s| s.session_id).collect(),
        catalog.urls().to_vec(),
        &rows,
    )
}
