//! Deterministic synthetic data with known structure.
//!
//! Real access logs come without ground truth, so tests, examples and the
//! bundled CLI fixtures are built from planted prototypes instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clustering::{Clustering, Method};
use crate::ingest::PageViewRecord;
use crate::matrix::SessionMatrix;
use crate::metrics::ClassLabels;

/// Pages per prototype in [`planted_noise`].
pub const PROTOTYPE_PAGES: usize = 6;
/// Shared "extra" pages that members may add and outliers mix in.
pub const EXTRA_PAGES: usize = 6;

/// Class label given to injected outliers.
pub const NOISE_CLASS: &str = "noise";

/// Three tight prototype groups with injected outlier sessions.
#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub matrix: SessionMatrix,
    /// Prototype name per row, or [`NOISE_CLASS`] for outliers.
    pub labels: ClassLabels,
    /// Every row (outliers included) assigned to the prototype it was built from.
    pub truth: Clustering,
    /// Row indices of the outliers.
    pub outliers: Vec<usize>,
}

/// `groups` prototypes of [`PROTOTYPE_PAGES`] disjoint pages each, `members`
/// sessions per prototype, and two outliers per prototype.
///
/// A member views its prototype's pages and, for three out of four members,
/// one extra page. Members of one group are therefore at most 2/8 apart under
/// the contingency dissimilarity. An outlier keeps four of its prototype's
/// pages and adds three extra pages, which puts it more than 4/9 away from
/// every member.
pub fn planted_noise(groups: usize, members: usize) -> PlantedFixture {
    let m = groups * PROTOTYPE_PAGES + EXTRA_PAGES;
    let extra = |e: usize| groups * PROTOTYPE_PAGES + e;
    let mut rows = Vec::new();
    let mut classes = Vec::new();
    let mut truth = Vec::new();
    let mut outliers = Vec::new();

    for g in 0..groups {
        let base = g * PROTOTYPE_PAGES;
        let name = ((b'A' + g as u8) as char).to_string();
        for i in 0..members {
            let mut row = vec![0u8; m];
            row[base..base + PROTOTYPE_PAGES].fill(1);
            if i % 4 != 0 {
                row[extra(i % EXTRA_PAGES)] = 1;
            }
            rows.push(row);
            classes.push(name.clone());
            truth.push(g);
        }
        for (keep, extras) in [(0..4, 0..3), (2..6, 3..6)] {
            let mut row = vec![0u8; m];
            for p in keep {
                row[base + p] = 1;
            }
            for e in extras {
                row[extra(e)] = 1;
            }
            outliers.push(rows.len());
            rows.push(row);
            classes.push(NOISE_CLASS.to_string());
            truth.push(g);
        }
    }

    let matrix = SessionMatrix::from_rows(
        (1..=rows.len() as u64).collect(),
        (0..m).map(|j| format!("/p{j:02}")).collect(),
        &rows,
    )
    .expect("planted rows are binary and ids unique");
    PlantedFixture {
        matrix,
        labels: ClassLabels::from_classes(classes),
        truth: Clustering::from_labels(groups, &truth, Method::KMeans).expect("labels below groups"),
        outliers,
    }
}

/// Section names of the synthetic site.
pub const SECTIONS: [&str; 3] = ["courses", "exams", "library"];
const PAGES_PER_SECTION: usize = 7;
const VISITORS_PER_SECTION: usize = 20;
const BOUNCERS: usize = 10;
const MARATHONERS: usize = 4;
const RARE_PAGES: usize = 4;
const WANDERER: usize = 7;
const EPOCH: u64 = 1_600_000_000;

/// A synthetic access log and the section each regular visitor browses.
#[derive(Debug, Clone)]
pub struct SyntheticLog {
    /// Records in timestamp order (file order on ties).
    pub records: Vec<PageViewRecord>,
    /// `(visitor_id, section)` for the 60 section visitors.
    pub interests: Vec<(String, String)>,
}

impl SyntheticLog {
    /// Renders the log in the `timestamp,visitor_id,url` format, with two
    /// unparsable rows appended.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,visitor_id,url\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.timestamp, r.visitor_id, r.url));
        }
        out.push_str("n/a,v-broken,/home\n");
        out.push_str("later,v-broken,/home\n");
        out
    }
}

/// Builds a log whose preprocessing outcome is known by construction:
///
/// * 60 section visitors (20 per section); each opens a session on `/home`
///   followed by the section's 7 pages, skipping at most one of them, so two
///   sessions of a section are at most 2/8 apart. Every fifth visitor returns
///   45 minutes later for a second session of the same shape. One visitor per
///   section wanders off instead: three pages of its own section, then four
///   of the next one.
/// * 10 bouncers with two views each (dropped by the 3-view rule).
/// * 4 visitors active every 25 minutes for 150 minutes (dropped by the
///   2-hour cap).
/// * 4 rare pages, each viewed 5 times inside section sessions (dropped by
///   the page-frequency rule).
///
/// With default settings this leaves 72 sessions over 22 pages.
pub fn synthetic_log(seed: u64) -> SyntheticLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut interests = Vec::new();
    let mut rare_left: Vec<usize> = vec![5; RARE_PAGES];
    let push = |records: &mut Vec<PageViewRecord>, t: u64, v: &str, url: String| {
        records.push(PageViewRecord {
            timestamp: t,
            visitor_id: v.to_string(),
            url,
        });
    };

    for (s, section) in SECTIONS.iter().enumerate() {
        let next = SECTIONS[(s + 1) % SECTIONS.len()];
        for i in 0..VISITORS_PER_SECTION {
            let visitor = format!("{section}-{i:02}");
            interests.push((visitor.clone(), section.to_string()));
            let pages: Vec<String> = if i == WANDERER {
                (0..3)
                    .map(|p| format!("/{section}/{p}"))
                    .chain((3..PAGES_PER_SECTION).map(|p| format!("/{next}/{p}")))
                    .collect()
            } else {
                // visitor i skips page i % 8, i.e. none for every eighth visitor
                (0..PAGES_PER_SECTION)
                    .filter(|&p| p != i % 8)
                    .map(|p| format!("/{section}/{p}"))
                    .collect()
            };
            let mut t = EPOCH + rng.random_range(0..86_400);
            let visit = |records: &mut Vec<PageViewRecord>,
                         t: &mut u64,
                         rng: &mut ChaCha8Rng,
                         rare: &mut Vec<usize>| {
                push(records, *t, &visitor, "/home".into());
                for page in &pages {
                    *t += rng.random_range(30..=300);
                    push(records, *t, &visitor, page.clone());
                }
                // sprinkle rare pages over the first sessions until each has 5 views
                if let Some(r) = rare.iter().position(|&left| left > 0) {
                    if (s * VISITORS_PER_SECTION + i).is_multiple_of(3) {
                        rare[r] -= 1;
                        *t += rng.random_range(30..=300);
                        push(records, *t, &visitor, format!("/rare/{r}"));
                    }
                }
            };
            visit(&mut records, &mut t, &mut rng, &mut rare_left);
            if i % 5 == 0 {
                t += 45 * 60;
                visit(&mut records, &mut t, &mut rng, &mut rare_left);
            }
        }
    }

    for b in 0..BOUNCERS {
        let visitor = format!("bounce-{b:02}");
        let t = EPOCH + rng.random_range(0..86_400);
        push(&mut records, t, &visitor, "/home".into());
        push(&mut records, t + 20, &visitor, format!("/courses/{}", b % PAGES_PER_SECTION));
    }

    for v in 0..MARATHONERS {
        let visitor = format!("marathon-{v}");
        let start = EPOCH + rng.random_range(0..86_400);
        for step in 0..=6u64 {
            push(&mut records, start + step * 25 * 60, &visitor, format!("/exams/{}", step % 5));
        }
    }

    records.sort_by_key(|r| r.timestamp);
    SyntheticLog { records, interests }
}
