//! MovieLens-1M ingestion, chronological splitting, cohort selection and
//! catalog statistics.
//!
//! The three source files use `::` as the field separator and are Latin-1
//! encoded. Malformed lines never abort a parse; they are collected into a
//! [`SkipReport`] so the caller can persist them next to the run.

mod cohort;
mod parse;
mod split;
mod stats;
pub mod synthetic;

pub use cohort::{select_cohort, Cohort, CohortParams};
pub use parse::{
    decode_latin1, encode_latin1, load_dataset, parse_movies, parse_movies_str, parse_ratings,
    parse_ratings_str, parse_users, parse_users_str, write_movies, write_ratings, write_users,
    Dataset,
};
pub use split::{split_chronological, SplitDataset, SplitFractions};
pub use stats::{dataset_stats, gini, stats_table, DatasetStats};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

/// Rating at or above which a held-out interaction counts as a true preference.
pub const RELEVANCE_THRESHOLD: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot compute statistics over an empty interaction list")]
    Empty,
    #[error("invalid split fractions: {0}")]
    Fractions(String),
    #[error("cohort of {requested} requested but only {eligible} users are eligible")]
    CohortTooLarge { requested: usize, eligible: usize },
}

/// One movie of the catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub item_id: u32,
    /// Title exactly as stored, e.g. `Matrix, The (1999)`.
    pub title: String,
    pub year: i32,
    pub genres: Vec<String>,
    /// The raw pipe-delimited genre field.
    pub genre_string: String,
}

impl CatalogItem {
    /// The stored title without its trailing `(YYYY)`.
    pub fn bare_title(&self) -> &str {
        strip_year_suffix(&self.title).0
    }
}

/// Splits `Title (1999)` into `("Title", Some(1999))`. Surrounding whitespace
/// is trimmed from the returned title.
pub(crate) fn strip_year_suffix(title: &str) -> (&str, Option<i32>) {
    let t = title.trim_end();
    let bytes = t.as_bytes();
    if bytes.len() >= 6 && bytes[bytes.len() - 1] == b')' && bytes[bytes.len() - 6] == b'(' {
        let digits = &t[t.len() - 5..t.len() - 1];
        if digits.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(year) = digits.parse() {
                return (t[..t.len() - 6].trim_end(), Some(year));
            }
        }
    }
    (t, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: u32,
    pub item_id: u32,
    pub rating: u8,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBucket {
    Teen,
    Young,
    Adult,
}

impl AgeBucket {
    pub const ALL: [AgeBucket; 3] = [AgeBucket::Teen, AgeBucket::Young, AgeBucket::Adult];

    /// Maps an ML-1M age code onto a bucket: `1` is Teen, `18` and `25` are
    /// Young, `35` and older are Adult.
    pub fn from_code(code: u8) -> Option<AgeBucket> {
        match code {
            1 => Some(AgeBucket::Teen),
            18 | 25 => Some(AgeBucket::Young),
            35 | 45 | 50 | 56 => Some(AgeBucket::Adult),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBucket::Teen => "Teen",
            AgeBucket::Young => "Young",
            AgeBucket::Adult => "Adult",
        }
    }
}

impl fmt::Display for AgeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: u32,
    pub gender: Gender,
    pub age_code: u8,
    pub age_bucket: AgeBucket,
    pub occupation_code: u32,
    /// Carried for lossless re-serialization only.
    pub zip: String,
}

/// One skipped source line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub file: String,
    pub line_no: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub entries: Vec<SkipEntry>,
}

impl SkipReport {
    pub fn push(&mut self, file: &str, line_no: usize, reason: impl Into<String>) {
        self.entries.push(SkipEntry {
            file: file.to_string(),
            line_no,
            reason: reason.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: SkipReport) {
        self.entries.extend(other.entries);
    }

    /// JSON lines, one `{file, line_no, reason}` object per entry.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("skip entry serializes"));
            out.push('\n');
        }
        out
    }
}

/// Catalog lookup by item id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    items: Vec<CatalogItem>,
    by_id: HashMap<u32, usize>,
}

impl Catalog {
    pub fn new(items: Vec<CatalogItem>) -> Self {
        let by_id = items
            .iter()
            .enumerate()
            .map(|(i, item)| (item.item_id, i))
            .collect();
        Catalog { items, by_id }
    }

    pub fn get(&self, item_id: u32) -> Option<&CatalogItem> {
        self.by_id.get(&item_id).map(|&i| &self.items[i])
    }

    pub fn items(&self) -> &[CatalogItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Sorted, de-duplicated individual genre names.
    pub fn genre_vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .items
            .iter()
            .flat_map(|i| i.genres.iter().cloned())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Restricts the catalog to items that occur in `interactions`.
    pub fn restricted_to(&self, interactions: &[Interaction]) -> Catalog {
        let used: std::collections::HashSet<u32> =
            interactions.iter().map(|i| i.item_id).collect();
        Catalog::new(
            self.items
                .iter()
                .filter(|i| used.contains(&i.item_id))
                .cloned()
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_bucketing_is_total_over_source_codes() {
        for code in [1u8, 18, 25, 35, 45, 50, 56] {
            assert!(AgeBucket::from_code(code).is_some());
        }
        assert_eq!(AgeBucket::from_code(1), Some(AgeBucket::Teen));
        assert_eq!(AgeBucket::from_code(25), Some(AgeBucket::Young));
        assert_eq!(AgeBucket::from_code(56), Some(AgeBucket::Adult));
        assert_eq!(AgeBucket::from_code(30), None);
    }

    #[test]
    fn year_suffix() {
        assert_eq!(strip_year_suffix("Matrix, The (1999)"), ("Matrix, The", Some(1999)));
        assert_eq!(strip_year_suffix("Jaws"), ("Jaws", None));
        assert_eq!(
            strip_year_suffix("City of Lost Children, The (Cité des enfants perdus, La) (1995)"),
            ("City of Lost Children, The (Cité des enfants perdus, La)", Some(1995))
        );
        assert_eq!(strip_year_suffix("(abcd)"), ("(abcd)", None));
    }
}
