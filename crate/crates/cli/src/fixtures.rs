//! The bundled sample data.
//!
//! * `fixtures/synthetic_log.csv` and `fixtures/synthetic_labels.csv`: a raw
//!   page-view log and the class of each session that survives preprocessing.
//! * `fixtures/planted_matrix.csv` and `fixtures/planted_labels.csv`: three
//!   prototype groups of 20 sessions plus 6 injected outliers, as a ready
//!   session matrix.
//!
//! A test keeps the checked-in files equal to the generator output
//! (`cargo run -p kra-cli --example gen_fixtures` rewrites them).

use std::collections::HashMap;

use anyhow::Result;

use kra_core::ingest::{self, SessionLimits, DEFAULT_MIN_PAGE_FREQUENCY, DEFAULT_MIN_VIEWS};
use kra_core::synth;

/// Prototype groups and members per group of the planted fixture.
pub const PLANTED_SHAPE: (usize, usize) = (3, 20);

/// Seed of the bundled sample log.
pub const FIXTURE_SEED: u64 = 2012;

/// The sample page-view log, including two deliberately malformed rows.
pub fn synthetic_log_csv() -> String {
    synth::synthetic_log(FIXTURE_SEED).to_csv()
}

/// `session_id,class` for every session that survives default preprocessing
/// of [`synthetic_log_csv`]; the class is the section the visitor browses.
pub fn synthetic_labels_csv() -> Result<String> {
    let log = synth::synthetic_log(FIXTURE_SEED);
    let interests: HashMap<&str, &str> =
        log.interests.iter().map(|(v, s)| (v.as_str(), s.as_str())).collect();
    let parsed = ingest::parse_log(log.to_csv().as_bytes())?;
    let sessions = ingest::sessionize(&parsed.records, SessionLimits::default())?;
    let sessions = ingest::filter_sessions(sessions, DEFAULT_MIN_VIEWS);
    let (sessions, _) = ingest::filter_pages(sessions, DEFAULT_MIN_PAGE_FREQUENCY);

    let mut out = String::from("session_id,class\n");
    for s in &sessions {
        if let Some(section) = interests.get(s.visitor_id.as_str()) {
            out.push_str(&format!("{},{}\n", s.session_id, section));
        }
    }
    Ok(out)
}

/// The planted-noise fixture as a `session_id,<urls>` matrix CSV.
pub fn planted_matrix_csv() -> Result<String> {
    let fixture = synth::planted_noise(PLANTED_SHAPE.0, PLANTED_SHAPE.1);
    let mut out = Vec::new();
    fixture.matrix.write_csv(&mut out)?;
    Ok(String::from_utf8(out)?)
}

/// `session_id,class` for the planted fixture; outliers carry class `noise`.
pub fn planted_labels_csv() -> String {
    let fixture = synth::planted_noise(PLANTED_SHAPE.0, PLANTED_SHAPE.1);
    let mut out = String::from("session_id,class\n");
    for (row, id) in fixture.matrix.row_ids().iter().enumerate() {
        let class = fixture.labels.get(row).expect("every planted row is labelled");
        out.push_str(&format!("{id},{class}\n"));
    }
    out
}
