use super::{AgeBucket, DataError, Gender, SplitDataset, UserRecord, RELEVANCE_THRESHOLD};
use crate::seed::rng_for;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortParams {
    pub cohort_size: usize,
    pub seed: u64,
    /// Minimum number of test interactions rated at or above the relevance threshold.
    pub min_test_relevant: usize,
    /// Minimum train history length, normally the largest profile scope swept.
    pub min_train: usize,
}

impl Default for CohortParams {
    fn default() -> Self {
        CohortParams {
            cohort_size: 150,
            seed: 0,
            min_test_relevant: 3,
            min_train: 10,
        }
    }
}

/// A selected cohort plus the accounting needed for the run report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    /// Selected users, ascending.
    pub user_ids: Vec<u32>,
    pub eligible: usize,
    /// `(gender, age)` → (eligible in cell, target, selected).
    pub cells: Vec<CellAllocation>,
    /// Seats filled from the global pool because a cell ran short.
    pub shortfall_filled: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellAllocation {
    pub gender: Gender,
    pub age: AgeBucket,
    pub eligible: usize,
    pub target: usize,
    pub selected: usize,
}

type Cell = (Gender, AgeBucket);

fn is_eligible(user: &UserRecord, split: &SplitDataset, p: &CohortParams) -> bool {
    let relevant = split
        .test_of(user.user_id)
        .iter()
        .filter(|i| i.rating >= RELEVANCE_THRESHOLD)
        .count();
    relevant >= p.min_test_relevant && split.train_of(user.user_id).len() >= p.min_train
}

/// Largest-remainder apportionment of `total` seats across `sizes`.
/// Remainder ties go to the earlier cell.
pub(crate) fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let pop: usize = sizes.iter().sum();
    if pop == 0 {
        return vec![0; sizes.len()];
    }
    let mut seats: Vec<usize> = sizes.iter().map(|&s| s * total / pop).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // Remainders compared as exact integers: (s·total mod pop).
    order.sort_by_key(|&i| std::cmp::Reverse((sizes[i] * total) % pop));
    let assigned: usize = seats.iter().sum();
    for &i in order.iter().take(total - assigned) {
        seats[i] += 1;
    }
    seats
}

/// Draws a gender × age stratified cohort.
pub fn select_cohort(
    users: &[UserRecord],
    split: &SplitDataset,
    params: &CohortParams,
) -> Result<Cohort, DataError> {
    let mut by_cell: BTreeMap<Cell, Vec<u32>> = BTreeMap::new();
    let mut sorted: Vec<&UserRecord> = users.iter().collect();
    sorted.sort_by_key(|u| u.user_id);
    sorted.dedup_by_key(|u| u.user_id);
    for u in sorted {
        if is_eligible(u, split, params) {
            by_cell.entry((u.gender, u.age_bucket)).or_default().push(u.user_id);
        }
    }
    let eligible: usize = by_cell.values().map(Vec::len).sum();
    if params.cohort_size > eligible {
        return Err(DataError::CohortTooLarge {
            requested: params.cohort_size,
            eligible,
        });
    }

    let cells: Vec<Cell> = by_cell.keys().copied().collect();
    let sizes: Vec<usize> = cells.iter().map(|c| by_cell[c].len()).collect();
    let targets = largest_remainder(&sizes, params.cohort_size);

    let mut chosen = Vec::with_capacity(params.cohort_size);
    let mut leftovers = Vec::new();
    let mut allocations = Vec::new();
    for (idx, cell) in cells.iter().enumerate() {
        let pool = &by_cell[cell];
        let take = targets[idx].min(pool.len());
        let mut rng = rng_for("cohort-cell", &[params.seed, idx as u64]);
        let mut picked = vec![false; pool.len()];
        for i in sample(&mut rng, pool.len(), take) {
            picked[i] = true;
        }
        for (i, &uid) in pool.iter().enumerate() {
            if picked[i] {
                chosen.push(uid);
            } else {
                leftovers.push(uid);
            }
        }
        allocations.push(CellAllocation {
            gender: cell.0,
            age: cell.1,
            eligible: pool.len(),
            target: targets[idx],
            selected: take,
        });
    }

    let shortfall = params.cohort_size - chosen.len();
    if shortfall > 0 {
        leftovers.sort_unstable();
        let mut rng = rng_for("cohort-fill", &[params.seed]);
        for i in sample(&mut rng, leftovers.len(), shortfall) {
            chosen.push(leftovers[i]);
        }
    }
    chosen.sort_unstable();
    Ok(Cohort {
        user_ids: chosen,
        eligible,
        cells: allocations,
        shortfall_filled: shortfall,
    })
}
