//! Profile sampling and passion summaries.
//!
//! A profile is the N-item slice of a user's train history that gets spelled
//! out inside the prompt. Three strategies pick it: a seeded random draw, the
//! user's highest ratings, or the most recent interactions.

use crate::dataset::{Catalog, CatalogItem, Interaction};
use crate::seed::rng_for;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Profile scope used when nothing else is configured.
pub const DEFAULT_SCOPE: usize = 10;
/// Scopes compared in the scope sweep.
pub const SWEEP_SCOPES: [usize; 3] = [5, 10, 15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    TopRated,
    Recent,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Random, Strategy::TopRated, Strategy::Recent];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::TopRated => "top-rated",
            Strategy::Recent => "recent",
        }
    }

    pub(crate) fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "top-rated" | "toprated" | "top_rated" => Ok(Strategy::TopRated),
            "recent" => Ok(Strategy::Recent),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub item: CatalogItem,
    pub rating: u8,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub user_id: u32,
    pub strategy: Strategy,
    pub n_requested: usize,
    pub items: Vec<ProfileEntry>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassionSummary {
    pub top_genre_strings: Vec<String>,
    pub year_min: i32,
    pub year_max: i32,
}

/// Selects up to `n` items of `train` under `strategy`.
///
/// Interactions whose item is missing from `catalog` are ignored, as are
/// repeated item ids (the first occurrence in `(timestamp, item_id)` order is
/// kept).
pub fn sample_profile(
    train: &[Interaction],
    catalog: &Catalog,
    strategy: Strategy,
    n: usize,
    seed: u64,
) -> ProfileSample {
    let mut history: Vec<&Interaction> = train
        .iter()
        .filter(|i| catalog.get(i.item_id).is_some())
        .collect();
    history.sort_by_key(|i| (i.timestamp, i.item_id));
    let mut seen = std::collections::HashSet::new();
    history.retain(|i| seen.insert(i.item_id));

    let user_id = train.first().map(|i| i.user_id).unwrap_or(0);
    let take = n.min(history.len());
    let picked: Vec<&Interaction> = match strategy {
        Strategy::Random => {
            let mut rng = rng_for("profile-random", &[seed, user_id as u64, n as u64]);
            let mut idx = sample(&mut rng, history.len(), take).into_vec();
            // `history` is already chronological, so index order is time order.
            idx.sort_unstable();
            idx.into_iter().map(|i| history[i]).collect()
        }
        Strategy::TopRated => {
            let mut h = history.clone();
            h.sort_by(|a, b| {
                b.rating
                    .cmp(&a.rating)
                    .then(b.timestamp.cmp(&a.timestamp))
                    .then(a.item_id.cmp(&b.item_id))
            });
            h.truncate(take);
            h
        }
        Strategy::Recent => {
            let mut h = history.clone();
            h.sort_by(|a, b| b.timestamp.cmp(&a.timestamp).then(a.item_id.cmp(&b.item_id)));
            h.truncate(take);
            h
        }
    };

    ProfileSample {
        user_id,
        strategy,
        n_requested: n,
        items: picked
            .into_iter()
            .map(|i| ProfileEntry {
                item: catalog.get(i.item_id).expect("filtered above").clone(),
                rating: i.rating,
                timestamp: i.timestamp,
            })
            .collect(),
        seed,
    }
}

/// Three most frequent full genre strings (ties alphabetical) and the span of
/// release years. Returns `None` for an empty profile.
pub fn build_passion_summary(profile: &ProfileSample) -> Option<PassionSummary> {
    if profile.items.is_empty() {
        return None;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &profile.items {
        *counts.entry(e.item.genre_string.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    // BTreeMap order is alphabetical; a stable sort on count keeps it for ties.
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
    let years = profile.items.iter().map(|e| e.item.year);
    Some(PassionSummary {
        top_genre_strings: ranked.into_iter().take(3).map(|(g, _)| g.to_string()).collect(),
        year_min: years.clone().min().expect("non-empty"),
        year_max: years.max().expect("non-empty"),
    })
}
