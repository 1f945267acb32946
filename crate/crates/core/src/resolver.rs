//! Free-text completions back to catalog item ids.
//!
//! Lines are stripped of list markers and split into a title and an optional
//! year. Titles are compared in a normalized form (lowercase, collapsed
//! whitespace, trailing articles moved to the front) using the
//! Ratcliff/Obershelp ratio, computed exactly as Python's
//! `difflib.SequenceMatcher(None, a, b, autojunk=False).ratio()` does.

use crate::dataset::{strip_year_suffix, Catalog};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

const ARTICLES: [&str; 7] = ["the", "a", "an", "le", "la", "les", "il"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleCandidate {
    /// 1-based position in the response.
    pub rank: usize,
    pub raw_title: String,
    pub year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedItem {
    pub item_id: u32,
    pub rank: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub instruction_fingerprint: String,
    pub resolved: Vec<ResolvedItem>,
    pub unresolved: Vec<TitleCandidate>,
    pub match_rate: f64,
}

impl RecommendationList {
    pub fn item_ids(&self) -> Vec<u32> {
        self.resolved.iter().map(|r| r.item_id).collect()
    }
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d+\s*[.)\-]|[-*•–·])\s*").expect("valid regex"))
}

fn title_year_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(.+?)\s*\((\d{4})\)").expect("valid regex"))
}

fn trim_decoration(s: &str) -> &str {
    s.trim().trim_matches(|c: char| matches!(c, '*' | '"' | '`' | '“' | '”')).trim()
}

pub fn extract_candidates(text: &str) -> Vec<TitleCandidate> {
    let mut out = Vec::new();
    for line in text.lines() {
        let cleaned = marker_re().replace(line, "");
        let cleaned = trim_decoration(&cleaned);
        let (title, year) = match title_year_re().captures(cleaned) {
            Some(c) => (trim_decoration(&c[1]).to_string(), c[2].parse().ok()),
            None => (cleaned.to_string(), None),
        };
        if title.chars().count() < 2 {
            continue;
        }
        out.push(TitleCandidate {
            rank: out.len() + 1,
            raw_title: title,
            year,
        });
    }
    out
}

fn collapse_lower(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// `"matrix, the"` → `"the matrix"`; tolerant of a missing space after the comma.
fn transpose_article(s: &str) -> String {
    if let Some(comma) = s.rfind(',') {
        let tail = s[comma + 1..].trim_start();
        if ARTICLES.contains(&tail) {
            return format!("{tail} {}", s[..comma].trim_end());
        }
    }
    s.to_string()
}

/// Splits `"main (alt)"` at its trailing parenthetical, if any.
fn split_alt(s: &str) -> (&str, Option<&str>) {
    if let Some(body) = s.strip_suffix(')') {
        if let Some(open) = body.rfind('(') {
            let main = body[..open].trim_end();
            let alt = body[open + 1..].trim();
            if !main.is_empty() && !alt.is_empty() && !alt.contains(')') {
                return (main, Some(alt));
            }
        }
    }
    (s, None)
}

pub fn normalize_title(s: &str) -> String {
    let collapsed = collapse_lower(s);
    let (t, _) = strip_year_suffix(&collapsed);
    let (main, alt) = split_alt(t);
    match alt {
        Some(alt) => format!("{} ({alt})", transpose_article(main)),
        None => transpose_article(main),
    }
}

/// Forms a catalog title is matched under: the normalized form first, then
/// the untransposed form, the title without its alternate name (both ways),
/// and the alternate name itself.
fn index_keys(title: &str) -> Vec<String> {
    let collapsed = collapse_lower(title);
    let (t, _) = strip_year_suffix(&collapsed);
    let mut keys = vec![normalize_title(title), t.to_string()];
    let (main, alt) = split_alt(t);
    if let Some(alt) = alt {
        keys.push(transpose_article(main));
        keys.push(main.to_string());
        keys.push(transpose_article(alt));
    }
    let mut seen = HashSet::new();
    keys.retain(|k| !k.is_empty() && seen.insert(k.clone()));
    keys
}

/// Ratio as the exact pair `(matched, |a| + |b|)`; the float value is `2m/t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Score {
    m: usize,
    t: usize,
}

impl Score {
    fn value(self) -> f64 {
        if self.t == 0 {
            1.0
        } else {
            (2 * self.m) as f64 / self.t as f64
        }
    }

    fn cmp_value(self, other: Score) -> Ordering {
        if self.t == 0 || other.t == 0 {
            return self.value().total_cmp(&other.value());
        }
        (self.m * other.t).cmp(&(other.m * self.t))
    }
}

#[allow(clippy::needless_range_loop)]
fn longest_match(a: &[char], b: &[char], alo: usize, ahi: usize, blo: usize, bhi: usize) -> (usize, usize, usize) {
    let (mut besti, mut bestj, mut bestk) = (alo, blo, 0);
    let width = bhi - blo + 1;
    let mut prev = vec![0usize; width];
    let mut cur = vec![0usize; width];
    for i in alo..ahi {
        for j in blo..bhi {
            let k = if a[i] == b[j] { prev[j - blo] + 1 } else { 0 };
            cur[j - blo + 1] = k;
            if k > bestk {
                besti = i + 1 - k;
                bestj = j + 1 - k;
                bestk = k;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        cur[0] = 0;
    }
    (besti, bestj, bestk)
}

fn matched_chars(a: &[char], b: &[char]) -> usize {
    let mut total = 0;
    let mut queue = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, k) = longest_match(a, b, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        total += k;
        queue.push((alo, i, blo, j));
        queue.push((i + k, ahi, j + k, bhi));
    }
    total
}

fn score_chars(a: &[char], b: &[char]) -> Score {
    Score {
        m: matched_chars(a, b),
        t: a.len() + b.len(),
    }
}

/// Ratcliff/Obershelp similarity `2·M / (|a| + |b|)` over Unicode scalars.
/// Two empty strings score 1.0.
pub fn similarity_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    score_chars(&a, &b).value()
}

struct Key {
    chars: Vec<char>,
    counts: HashMap<char, usize>,
}

impl Key {
    fn new(s: &str) -> Self {
        let chars: Vec<char> = s.chars().collect();
        let mut counts = HashMap::new();
        for &c in &chars {
            *counts.entry(c).or_insert(0) += 1;
        }
        Key { chars, counts }
    }

    /// Multiset intersection size, an upper bound on the matched count.
    fn common(&self, other: &Key) -> usize {
        self.counts
            .iter()
            .map(|(c, n)| (*n).min(other.counts.get(c).copied().unwrap_or(0)))
            .sum()
    }
}

struct Entry {
    item_id: u32,
    year: i32,
    keys: Vec<Key>,
}

/// Catalog titles, normalized once. Immutable and shareable across threads.
pub struct CatalogIndex {
    entries: Vec<Entry>,
    exact: HashMap<String, Vec<usize>>,
}

struct Best {
    idx: usize,
    score: Score,
}

impl CatalogIndex {
    pub fn new(catalog: &Catalog) -> Self {
        let mut items: Vec<_> = catalog.items().iter().collect();
        items.sort_by_key(|it| it.item_id);
        let mut entries = Vec::with_capacity(items.len());
        let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
        for it in items {
            let keys = index_keys(&it.title);
            for k in &keys {
                exact.entry(k.clone()).or_default().push(entries.len());
            }
            entries.push(Entry {
                item_id: it.item_id,
                year: it.year,
                keys: keys.iter().map(|k| Key::new(k)).collect(),
            });
        }
        for v in exact.values_mut() {
            v.dedup();
        }
        CatalogIndex { entries, exact }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn exact_match(&self, norm: &str, year: Option<i32>) -> Option<u32> {
        let hits = self.exact.get(norm)?;
        hits.iter()
            .map(|&i| &self.entries[i])
            .min_by_key(|e| (year.map_or(0, |y| (e.year - y).abs()), e.item_id))
            .map(|e| e.item_id)
    }

    /// `a` beats `b`: higher score, then exact year, then smaller id.
    fn better(&self, a: &Best, b: &Best, year: Option<i32>) -> bool {
        match a.score.cmp_value(b.score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let (ea, eb) = (&self.entries[a.idx], &self.entries[b.idx]);
                let ya = year == Some(ea.year);
                let yb = year == Some(eb.year);
                if ya != yb {
                    ya
                } else {
                    ea.item_id < eb.item_id
                }
            }
        }
    }

    fn best_fuzzy(&self, cand: &Key, year: Option<i32>, window: Option<i32>, threshold: f64) -> Option<Best> {
        let mut best: Option<Best> = None;
        let la = cand.chars.len();
        for (idx, e) in self.entries.iter().enumerate() {
            if let Some(y) = window {
                if (e.year - y).abs() > 1 {
                    continue;
                }
            }
            for key in &e.keys {
                let t = la + key.chars.len();
                let ub = Score { m: la.min(key.chars.len()), t };
                if ub.value() < threshold || best.as_ref().is_some_and(|b| ub.cmp_value(b.score) == Ordering::Less) {
                    continue;
                }
                let ub = Score { m: cand.common(key), t };
                if ub.value() < threshold || best.as_ref().is_some_and(|b| ub.cmp_value(b.score) == Ordering::Less) {
                    continue;
                }
                let next = Best { idx, score: score_chars(&cand.chars, &key.chars) };
                if next.score.value() < threshold {
                    continue;
                }
                if best.as_ref().is_none_or(|b| self.better(&next, b, year)) {
                    best = Some(next);
                }
            }
        }
        best
    }

    /// Best catalog item for one candidate, with its score.
    pub fn lookup(&self, candidate: &TitleCandidate, threshold: f64) -> Option<(u32, f64)> {
        let norm = normalize_title(&candidate.raw_title);
        if let Some(id) = self.exact_match(&norm, candidate.year) {
            return Some((id, 1.0));
        }
        let key = Key::new(&norm);
        let best = candidate
            .year
            .and_then(|y| self.best_fuzzy(&key, candidate.year, Some(y), threshold))
            .or_else(|| self.best_fuzzy(&key, candidate.year, None, threshold))?;
        Some((self.entries[best.idx].item_id, best.score.value()))
    }

    pub fn resolve(&self, fingerprint: &str, candidates: &[TitleCandidate], threshold: f64) -> RecommendationList {
        let mut resolved = Vec::new();
        let mut unresolved = Vec::new();
        let mut seen = HashSet::new();
        for c in candidates {
            match self.lookup(c, threshold) {
                Some((item_id, score)) => {
                    if seen.insert(item_id) {
                        resolved.push(ResolvedItem { item_id, rank: c.rank, score });
                    }
                }
                None => unresolved.push(c.clone()),
            }
        }
        let denom = resolved.len() + unresolved.len();
        let match_rate = if denom == 0 { 0.0 } else { resolved.len() as f64 / denom as f64 };
        RecommendationList {
            instruction_fingerprint: fingerprint.to_string(),
            resolved,
            unresolved,
            match_rate,
        }
    }
}

/// One-off resolution; build a [`CatalogIndex`] instead when resolving many lists.
pub fn resolve(candidates: &[TitleCandidate], catalog: &Catalog, threshold: f64) -> RecommendationList {
    CatalogIndex::new(catalog).resolve("", candidates, threshold)
}

/// `n` catalog titles (sampled with `seed`), each with one character of the
/// bare title deleted, rendered as `Title (Year)`. Returns `(item_id, text)`.
pub fn deletion_corpus(catalog: &Catalog, n: usize, seed: u64) -> Vec<(u32, String)> {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut items: Vec<_> = catalog.items().iter().collect();
    items.sort_by_key(|it| it.item_id);
    let mut rng = crate::seed::rng_for("deletion-corpus", &[seed]);
    items
        .choose_multiple(&mut rng, n.min(items.len()))
        .map(|it| {
            let mut chars: Vec<char> = it.bare_title().chars().collect();
            if chars.len() > 1 {
                let at = rng.gen_range(0..chars.len());
                chars.remove(at);
            }
            let t: String = chars.into_iter().collect();
            (it.item_id, format!("{t} ({})", it.year))
        })
        .collect()
}
