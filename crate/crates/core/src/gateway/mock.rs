//! Deterministic synthetic recommender with injectable stereotype bias.
//!
//! The mock reads the passion sentence back out of the instruction and draws a
//! base list of `k` catalog items matching those genres and years. The base
//! list depends only on `(user, strategy, seed)` and the passion sentence, so
//! every condition of a user starts from the same list. For a sensitive
//! condition each base position is then independently swapped, with
//! probability `p`, for an item from the condition's stereotype genres that
//! is not already in the base list.
//!
//! Each position's swap decision is a fixed uniform draw compared against
//! `p`, so the set of swapped positions only grows as `p` grows. Replacements
//! never collide with base items, so Jaccard similarity to the neutral list
//! is `(k − r)/(k + r)` for `r` swaps.

use super::{GatewayError, RawResponse, ResponseSource};
use crate::dataset::{Catalog, CatalogItem};
use crate::prompts::{attribute_phrase, parse_passion, Condition, PromptInstruction};
use crate::seed::{rng_for, unit_for};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    /// Per-position replacement probability for sensitive conditions.
    pub bias_strength: f64,
    /// Attribute phrase (`Female`, `Teen`, `Teen Female`, ...) to genre names.
    /// An intersection without its own entry uses the union of its parts.
    pub stereotype_map: BTreeMap<String, Vec<String>>,
    /// Shrinks the effective strength as the profile grows:
    /// `p / (1 + damping·(n_profile − 1))`. Zero disables it.
    #[serde(default)]
    pub scope_damping: f64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self::with_strength(0.0)
    }
}

impl BiasConfig {
    /// Default stereotypes: Female → Romance, Teen → Animation and Children's.
    /// Male, Young and Adult are unmapped and so never perturbed.
    pub fn with_strength(p: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert("Female".to_string(), vec!["Romance".to_string()]);
        m.insert(
            "Teen".to_string(),
            vec!["Animation".to_string(), "Children's".to_string()],
        );
        BiasConfig {
            bias_strength: p,
            stereotype_map: m,
            scope_damping: 0.0,
        }
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<(), GatewayError> {
        if !(0.0..=1.0).contains(&self.bias_strength) {
            return Err(GatewayError::Config(format!(
                "bias strength {} outside [0, 1]",
                self.bias_strength
            )));
        }
        if self.scope_damping.is_nan() || self.scope_damping < 0.0 {
            return Err(GatewayError::Config("scope damping must be >= 0".into()));
        }
        let vocab: HashSet<String> = catalog.genre_vocabulary().into_iter().collect();
        for (phrase, genres) in &self.stereotype_map {
            for g in genres {
                if !vocab.contains(g) {
                    return Err(GatewayError::Config(format!(
                        "stereotype genre {g:?} for {phrase:?} is not in the catalog"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stereotype genres for a condition, sorted and de-duplicated.
    pub fn genres_for(&self, condition: Condition) -> Vec<String> {
        let mut out: Vec<String> = match condition {
            Condition::Neutral => Vec::new(),
            Condition::Intersectional(g, a) => {
                match self.stereotype_map.get(&attribute_phrase(condition)) {
                    Some(v) => v.clone(),
                    None => [a.label(), g.label()]
                        .iter()
                        .filter_map(|p| self.stereotype_map.get(*p))
                        .flatten()
                        .cloned()
                        .collect(),
                }
            }
            other => self
                .stereotype_map
                .get(&attribute_phrase(other))
                .cloned()
                .unwrap_or_default(),
        };
        out.sort();
        out.dedup();
        out
    }

    pub fn effective_strength(&self, n_profile: usize) -> f64 {
        self.bias_strength / (1.0 + self.scope_damping * n_profile.saturating_sub(1) as f64)
    }
}

fn base_pool<'a>(instruction: &PromptInstruction, catalog: &'a Catalog) -> Vec<&'a CatalogItem> {
    let k = instruction.k;
    let Some(passion) = parse_passion(&instruction.text) else {
        return catalog.items().iter().collect();
    };
    let wanted: HashSet<&str> = passion
        .genre_strings
        .iter()
        .flat_map(|g| g.split('|'))
        .collect();
    let genre_match = |it: &&CatalogItem| it.genres.iter().any(|g| wanted.contains(g.as_str()));
    let strict: Vec<&CatalogItem> = catalog
        .items()
        .iter()
        .filter(genre_match)
        .filter(|it| (passion.year_min..=passion.year_max).contains(&it.year))
        .collect();
    if strict.len() >= k {
        return strict;
    }
    let by_genre: Vec<&CatalogItem> = catalog.items().iter().filter(genre_match).collect();
    if by_genre.len() >= k {
        return by_genre;
    }
    catalog.items().iter().collect()
}

/// Base list, final list and how many positions the bias swapped.
pub struct MockDraw<'a> {
    pub base: Vec<&'a CatalogItem>,
    pub output: Vec<&'a CatalogItem>,
    pub replaced: usize,
}

pub fn draw<'a>(
    instruction: &PromptInstruction,
    catalog: &'a Catalog,
    bias: &BiasConfig,
    seed: u64,
) -> MockDraw<'a> {
    let user = instruction.user_id as u64;
    let strategy = instruction.strategy.index();
    let mut pool = base_pool(instruction, catalog);
    pool.sort_by_key(|it| it.item_id);
    let mut rng = rng_for("mock-base", &[seed, user, strategy]);
    pool.shuffle(&mut rng);
    let base: Vec<&CatalogItem> = pool.into_iter().take(instruction.k).collect();

    let mut output = base.clone();
    let mut replaced = 0;
    let genres = bias.genres_for(instruction.condition);
    let p = bias.effective_strength(instruction.n_profile);
    if !genres.is_empty() && p > 0.0 {
        let in_base: HashSet<u32> = base.iter().map(|it| it.item_id).collect();
        let mut replacements: Vec<&CatalogItem> = catalog
            .items()
            .iter()
            .filter(|it| !in_base.contains(&it.item_id))
            .filter(|it| it.genres.iter().any(|g| genres.contains(g)))
            .collect();
        replacements.sort_by_key(|it| it.item_id);
        let cond = instruction.condition.index();
        let mut rng = rng_for("mock-replace", &[seed, user, strategy, cond]);
        replacements.shuffle(&mut rng);
        let mut next = replacements.into_iter();
        for (pos, slot) in output.iter_mut().enumerate() {
            let u = unit_for("mock-flip", &[seed, user, strategy, cond, pos as u64]);
            if u < p {
                if let Some(r) = next.next() {
                    *slot = r;
                    replaced += 1;
                }
            }
        }
    }
    MockDraw {
        base,
        output,
        replaced,
    }
}

/// Pure function of its arguments.
pub fn mock_complete(
    instruction: &PromptInstruction,
    catalog: &Catalog,
    bias: &BiasConfig,
    seed: u64,
) -> RawResponse {
    let d = draw(instruction, catalog, bias, seed);
    let mut text = String::new();
    for it in &d.output {
        text.push_str(&it.title);
        text.push('\n');
    }
    RawResponse {
        instruction_fingerprint: instruction.fingerprint.clone(),
        text,
        source: ResponseSource::Mock,
        latency_ms: 0,
        retrieved_at: 0,
    }
}
