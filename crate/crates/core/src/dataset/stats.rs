use super::{Catalog, DataError, Interaction};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    /// `100·(1 − R/(U·I))`.
    pub sparsity_pct: f64,
    pub ratings_per_user: f64,
    pub ratings_per_item: f64,
    pub gini_item: f64,
    pub gini_user: f64,
}

/// Gini coefficient of a non-negative count vector:
/// `Σ (2i − n − 1)·x_i / (n·Σ x_i)` over ascending `x`, 1-based `i`.
/// Returns 0 for an empty or all-zero vector.
pub fn gini(counts: &[u64]) -> f64 {
    let n = counts.len();
    let total: u64 = counts.iter().sum();
    if n == 0 || total == 0 {
        return 0.0;
    }
    let mut x = counts.to_vec();
    x.sort_unstable();
    // Integer accumulation keeps the result independent of summation order.
    let num: i128 = x
        .iter()
        .enumerate()
        .map(|(i, &v)| (2 * (i as i128 + 1) - n as i128 - 1) * v as i128)
        .sum();
    num as f64 / (n as f64 * total as f64)
}

/// Counts are taken over the distinct users and items that appear in
/// `interactions`; catalog entries nobody rated do not count toward `|I|`.
pub fn dataset_stats(_catalog: &Catalog, interactions: &[Interaction]) -> Result<DatasetStats, DataError> {
    if interactions.is_empty() {
        return Err(DataError::Empty);
    }
    let mut per_user: HashMap<u32, u64> = HashMap::new();
    let mut per_item: HashMap<u32, u64> = HashMap::new();
    for i in interactions {
        *per_user.entry(i.user_id).or_default() += 1;
        *per_item.entry(i.item_id).or_default() += 1;
    }
    let n_users = per_user.len();
    let n_items = per_item.len();
    let n_ratings = interactions.len();
    let density = n_ratings as f64 / (n_users as f64 * n_items as f64);
    let user_counts: Vec<u64> = per_user.into_values().collect();
    let item_counts: Vec<u64> = per_item.into_values().collect();
    Ok(DatasetStats {
        n_users,
        n_items,
        n_ratings,
        sparsity_pct: 100.0 * (1.0 - density),
        ratings_per_user: n_ratings as f64 / n_users as f64,
        ratings_per_item: n_ratings as f64 / n_items as f64,
        gini_item: gini(&item_counts),
        gini_user: gini(&user_counts),
    })
}

/// Plain-text table, one row per labelled dataset, columns in the order
/// |U| |I| |R| Sparsity(%) R/U R/I GiniItem GiniUser.
pub fn stats_table(rows: &[(&str, &DatasetStats)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(7).max(7);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>6}  {:>6}  {:>9}  {:>12}  {:>8}  {:>8}  {:>9}  {:>9}",
        "Dataset", "|U|", "|I|", "|R|", "Sparsity(%)", "R/U", "R/I", "GiniItem", "GiniUser"
    );
    for (label, st) in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>6}  {:>9}  {:>12.4}  {:>8.2}  {:>8.2}  {:>9.4}  {:>9.4}",
            label,
            st.n_users,
            st.n_items,
            st.n_ratings,
            st.sparsity_pct,
            st.ratings_per_user,
            st.ratings_per_item,
            st.gini_item,
            st.gini_user
        );
    }
    s
}
