//! Neutral-vs-sensitive list similarity and the fairness aggregates.
//!
//! Every metric compares the list produced for a sensitive condition with the
//! neutral list of the same user, strategy and profile size. Per-condition
//! means over the cohort are then folded into SNSR (range) and SNSV
//! (population standard deviation) per attribute group.

use crate::profiler::Strategy;
use crate::prompts::{AttributeGroup, Condition};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("list of length {len} exceeds k = {k}")]
    KTooSmall { k: usize, len: usize },
    #[error("item {0} appears twice in a ranked list")]
    Duplicate(u32),
    #[error("no results for {0}")]
    Empty(String),
}

/// Duplicate-free item list. Each item keeps the 1-based rank it had in the
/// list it was first built from, so filtering does not renumber.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RankedList {
    items: Vec<u32>,
    ranks: Vec<usize>,
}

impl RankedList {
    pub fn new(items: Vec<u32>) -> Result<Self, MetricError> {
        let mut seen = HashSet::new();
        if let Some(&d) = items.iter().find(|&&v| !seen.insert(v)) {
            return Err(MetricError::Duplicate(d));
        }
        let ranks = (1..=items.len()).collect();
        Ok(RankedList { items, ranks })
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Rank of `v`, or `None` (rank +∞) when absent.
    pub fn rank(&self, v: u32) -> Option<usize> {
        self.items.iter().position(|&x| x == v).map(|i| self.ranks[i])
    }

    fn rank_map(&self) -> HashMap<u32, usize> {
        self.items.iter().copied().zip(self.ranks.iter().copied()).collect()
    }
}

/// `|a ∩ b| / |a ∪ b|`; two empty lists score 0.
pub fn jaccard(a: &RankedList, b: &RankedList) -> f64 {
    let sa: BTreeSet<u32> = a.items.iter().copied().collect();
    let sb: BTreeSet<u32> = b.items.iter().copied().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PragVariant {
    /// Numerator over `K(K+1)`.
    Literal,
    /// Numerator over `K(K−1)/2`; identical lists of length K score 1.
    Normalized,
}

/// Ordered pairs `(v1, v2)` of `ra` with `v1` in `rn`, `v1` before `v2` in
/// `ra` and `v1` before `v2` in `rn` (an absent `v2` ranks last).
pub fn prag_numerator(ra: &RankedList, rn: &RankedList) -> u64 {
    let rn_rank = rn.rank_map();
    let mut count = 0;
    for (i, v1) in ra.items.iter().enumerate() {
        let Some(&r1) = rn_rank.get(v1) else { continue };
        for v2 in &ra.items[i + 1..] {
            if rn_rank.get(v2).is_none_or(|&r2| r1 < r2) {
                count += 1;
            }
        }
    }
    count
}

pub fn prag_star(ra: &RankedList, rn: &RankedList, k: usize, variant: PragVariant) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if ra.len() > k {
        return Err(MetricError::KTooSmall { k, len: ra.len() });
    }
    let num = prag_numerator(ra, rn) as f64;
    let k = k as f64;
    Ok(match variant {
        PragVariant::Literal => num / (k * (k + 1.0)),
        PragVariant::Normalized if k < 2.0 => 0.0,
        PragVariant::Normalized => num / (k * (k - 1.0) / 2.0),
    })
}

/// Keeps only items in `relevant`, with their original ranks.
pub fn filter_by_preference(r: &RankedList, relevant: &HashSet<u32>) -> RankedList {
    let (items, ranks) = r
        .items
        .iter()
        .zip(&r.ranks)
        .filter(|(v, _)| relevant.contains(v))
        .map(|(&v, &rank)| (v, rank))
        .unzip();
    RankedList { items, ranks }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ItemSimilarity,
    PreferenceAligned,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::ItemSimilarity, Mode::PreferenceAligned];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ItemSimilarity => "item-similarity",
            Mode::PreferenceAligned => "preference-aligned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Jaccard,
    PragLiteral,
    PragNormalized,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Jaccard, Metric::PragLiteral, Metric::PragNormalized];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Jaccard => "jaccard",
            Metric::PragLiteral => "prag-literal",
            Metric::PragNormalized => "prag-normalized",
        }
    }
}

/// Similarity of one sensitive list to its neutral counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub user_id: u32,
    pub condition: Condition,
    pub strategy: Strategy,
    pub n_profile: usize,
    pub mode: Mode,
    pub jaccard: f64,
    pub prag_literal: f64,
    pub prag_normalized: f64,
    /// Lengths of the compared lists after any preference filtering.
    pub neutral_len: usize,
    pub sensitive_len: usize,
}

impl PairResult {
    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Jaccard => self.jaccard,
            Metric::PragLiteral => self.prag_literal,
            Metric::PragNormalized => self.prag_normalized,
        }
    }

    /// Both compared lists are empty, which only happens after filtering.
    pub fn both_empty(&self) -> bool {
        self.neutral_len == 0 && self.sensitive_len == 0
    }
}

/// The item-similarity and preference-aligned results for one sensitive list.
#[allow(clippy::too_many_arguments)]
pub fn compare_lists(
    user_id: u32,
    condition: Condition,
    strategy: Strategy,
    n_profile: usize,
    neutral: &RankedList,
    sensitive: &RankedList,
    relevant: &HashSet<u32>,
    k: usize,
) -> Result<[PairResult; 2], MetricError> {
    let score = |mode, n: &RankedList, s: &RankedList| -> Result<PairResult, MetricError> {
        Ok(PairResult {
            user_id,
            condition,
            strategy,
            n_profile,
            mode,
            jaccard: jaccard(s, n),
            prag_literal: prag_star(s, n, k, PragVariant::Literal)?,
            prag_normalized: prag_star(s, n, k, PragVariant::Normalized)?,
            neutral_len: n.len(),
            sensitive_len: s.len(),
        })
    };
    let fnl = filter_by_preference(neutral, relevant);
    let fsl = filter_by_preference(sensitive, relevant);
    Ok([
        score(Mode::ItemSimilarity, neutral, sensitive)?,
        score(Mode::PreferenceAligned, &fnl, &fsl)?,
    ])
}

/// How preference-aligned pairs with two empty filtered lists are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyPolicy {
    /// Counted with similarity 0.
    Zero,
    /// Left out of the mean.
    Skip,
}

/// Mean of `metric` over all results for `condition`, summed in user order.
pub fn aggregate(per_user: &[PairResult], condition: Condition, metric: Metric, policy: EmptyPolicy) -> Result<f64, MetricError> {
    let mut vals: Vec<(u32, f64)> = per_user
        .iter()
        .filter(|r| r.condition == condition)
        .filter(|r| policy == EmptyPolicy::Zero || !r.both_empty())
        .map(|r| (r.user_id, r.value(metric)))
        .collect();
    if vals.is_empty() {
        return Err(MetricError::Empty(condition.label()));
    }
    vals.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(vals.iter().map(|v| v.1).sum::<f64>() / vals.len() as f64)
}

pub fn snsr(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

pub fn snsv(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessCell {
    pub group: AttributeGroup,
    pub strategy: Strategy,
    pub n_profile: usize,
    pub mode: Mode,
    pub metric: Metric,
    /// Mean similarity per condition, in the group's column order. Under
    /// [`EmptyPolicy::Skip`] a condition with no non-empty pair is absent.
    pub values: Vec<(Condition, f64)>,
    pub snsr: f64,
    pub snsv: f64,
}

/// Folds per-user results into one cell per
/// (strategy, n_profile, mode, metric, group), in that sort order.
pub fn fairness_cells(results: &[PairResult], policy: EmptyPolicy) -> Result<Vec<FairnessCell>, MetricError> {
    let mut slices: HashMap<(Strategy, usize, Mode), Vec<PairResult>> = HashMap::new();
    for r in results {
        slices.entry((r.strategy, r.n_profile, r.mode)).or_default().push(r.clone());
    }
    let mut keys: Vec<_> = slices.keys().copied().collect();
    keys.sort();
    let mut out = Vec::new();
    for key in keys {
        let slice = &slices[&key];
        let policy = if key.2 == Mode::ItemSimilarity { EmptyPolicy::Zero } else { policy };
        for metric in Metric::ALL {
            for group in AttributeGroup::ALL {
                let mut values = Vec::new();
                for c in group.conditions() {
                    match aggregate(slice, c, metric, policy) {
                        Ok(s) => values.push((c, s)),
                        Err(MetricError::Empty(_)) if policy == EmptyPolicy::Skip => {}
                        Err(e) => return Err(e),
                    }
                }
                let s: Vec<f64> = values.iter().map(|v| v.1).collect();
                out.push(FairnessCell {
                    group,
                    strategy: key.0,
                    n_profile: key.1,
                    mode: key.2,
                    metric,
                    snsr: snsr(&s),
                    snsv: snsv(&s),
                    values,
                });
            }
        }
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AgeBucket, Gender};
    use crate::profiler::Strategy;
    use proptest::prelude::*;

    fn rl(v: &[u32]) -> RankedList {
        RankedList::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&rl(&[1, 2, 3]), &rl(&[1, 2, 3])), 1.0);
        assert_eq!(jaccard(&rl(&[1, 2]), &rl(&[3, 4])), 0.0);
        assert_eq!(jaccard(&rl(&[1, 2, 3, 4]), &rl(&[3, 4, 5, 6])), 2.0 / 6.0);
        assert_eq!(jaccard(&rl(&[]), &rl(&[])), 0.0);
    }

    #[test]
    fn prag_examples() {
        let abc = rl(&[1, 2, 3]);
        assert_eq!(prag_star(&abc, &abc, 3, PragVariant::Literal).unwrap(), 0.25);
        assert_eq!(prag_star(&abc, &abc, 3, PragVariant::Normalized).unwrap(), 1.0);
        let other = rl(&[7, 8, 9]);
        assert_eq!(prag_star(&abc, &other, 3, PragVariant::Literal).unwrap(), 0.0);
        assert_eq!(prag_star(&abc, &other, 3, PragVariant::Normalized).unwrap(), 0.0);
        // Ra = [A,B,C], Rn = [A,C,B]: (A,B) and (A,C) are concordant.
        let acb = rl(&[1, 3, 2]);
        assert_eq!(oracle::prag_numerator(&abc, &acb), 2);
        assert_eq!(prag_star(&abc, &acb, 3, PragVariant::Literal).unwrap(), 2.0 / 12.0);
        assert_eq!(prag_star(&abc, &acb, 3, PragVariant::Normalized).unwrap(), 2.0 / 3.0);
        assert_eq!(prag_star(&abc, &abc, 2, PragVariant::Literal), Err(MetricError::KTooSmall { k: 2, len: 3 }));
        assert_eq!(prag_star(&abc, &abc, 0, PragVariant::Literal), Err(MetricError::ZeroK));
        // Shorter lists than k are allowed.
        assert_eq!(prag_star(&abc, &abc, 10, PragVariant::Normalized).unwrap(), 3.0 / 45.0);
        assert_eq!(prag_star(&rl(&[4]), &rl(&[4]), 1, PragVariant::Normalized).unwrap(), 0.0);
    }

    #[test]
    fn identical_lists_closed_form() {
        for k in 2..=10u32 {
            let r = rl(&(0..k).collect::<Vec<_>>());
            let lit = prag_star(&r, &r, k as usize, PragVariant::Literal).unwrap();
            let kf = k as f64;
            assert!(close(lit, (kf - 1.0) / (2.0 * (kf + 1.0)), 1e-15));
            assert_eq!(prag_star(&r, &r, k as usize, PragVariant::Normalized).unwrap(), 1.0);
        }
    }

    #[test]
    fn filtering() {
        let r = rl(&[1, 2, 3]);
        let b = filter_by_preference(&r, &HashSet::from([2]));
        assert_eq!(b.items(), [2]);
        assert_eq!(b.rank(2), Some(2));
        assert!(filter_by_preference(&r, &HashSet::new()).is_empty());
        assert_eq!(filter_by_preference(&r, &HashSet::from([1, 2, 3, 4])), r);
        // PRAG on filtered lists compares original ranks.
        let n = filter_by_preference(&rl(&[3, 9, 1]), &HashSet::from([1, 3]));
        let s = filter_by_preference(&rl(&[1, 8, 3]), &HashSet::from([1, 3]));
        assert_eq!(n.rank(1), Some(3));
        assert_eq!(prag_numerator(&s, &n), 0);
    }

    #[test]
    fn duplicates_rejected() {
        assert_eq!(RankedList::new(vec![1, 2, 1]), Err(MetricError::Duplicate(1)));
    }

    #[test]
    fn reference_aggregates() {
        let two = [0.1680, 0.1670];
        assert!(close(snsr(&two), 0.0010, 5e-5));
        assert!(close(snsv(&two), 0.0005, 5e-5));
        let three = [0.1669, 0.1847, 0.1421];
        assert!(close(snsr(&three), 0.0426, 5e-5));
        assert!(close(snsv(&three), 0.0175, 5e-5));
        assert_eq!((snsr(&[0.4]), snsv(&[0.4])), (0.0, 0.0));
    }

    fn pr(user_id: u32, condition: Condition, jac: f64, lens: (usize, usize)) -> PairResult {
        PairResult {
            user_id,
            condition,
            strategy: Strategy::Random,
            n_profile: 10,
            mode: Mode::PreferenceAligned,
            jaccard: jac,
            prag_literal: 0.0,
            prag_normalized: 0.0,
            neutral_len: lens.0,
            sensitive_len: lens.1,
        }
    }

    #[test]
    fn aggregation() {
        let f = Condition::Gender(Gender::Female);
        let rs = [pr(2, f, 0.4, (1, 1)), pr(1, f, 0.2, (1, 1))];
        assert!(close(aggregate(&rs, f, Metric::Jaccard, EmptyPolicy::Zero).unwrap(), 0.3, 1e-15));
        assert_eq!(aggregate(&rs[..1], f, Metric::Jaccard, EmptyPolicy::Zero).unwrap(), 0.4);
        let zeros: Vec<_> = (0..150).map(|u| pr(u, f, 0.0, (1, 1))).collect();
        assert_eq!(aggregate(&zeros, f, Metric::Jaccard, EmptyPolicy::Zero).unwrap(), 0.0);
        assert!(aggregate(&rs, Condition::Neutral, Metric::Jaccard, EmptyPolicy::Zero).is_err());
        let rs = [pr(1, f, 0.6, (2, 1)), pr(2, f, 0.0, (0, 0))];
        assert_eq!(aggregate(&rs, f, Metric::Jaccard, EmptyPolicy::Zero).unwrap(), 0.3);
        assert_eq!(aggregate(&rs, f, Metric::Jaccard, EmptyPolicy::Skip).unwrap(), 0.6);
    }

    #[test]
    fn cells_cover_every_group() {
        let mut rs = Vec::new();
        for u in 1..=3 {
            for c in Condition::all().into_iter().filter(|c| !c.is_neutral()) {
                let v = if c == Condition::Age(AgeBucket::Teen) { 0.5 } else { 1.0 };
                rs.push(PairResult { mode: Mode::ItemSimilarity, ..pr(u, c, v, (10, 10)) });
            }
        }
        let cells = fairness_cells(&rs, EmptyPolicy::Zero).unwrap();
        assert_eq!(cells.len(), 3 * 3);
        let age = cells.iter().find(|c| c.group == AttributeGroup::Age && c.metric == Metric::Jaccard).unwrap();
        assert_eq!(age.values.len(), 3);
        assert_eq!(age.snsr, 0.5);
        let sex = cells.iter().find(|c| c.group == AttributeGroup::Sex && c.metric == Metric::Jaccard).unwrap();
        assert_eq!((sex.snsr, sex.snsv), (0.0, 0.0));
    }

    fn list() -> impl proptest::strategy::Strategy<Value = Vec<u32>> {
        use proptest::strategy::Strategy as _;
        prop::collection::btree_set(0u32..50, 0..=10).prop_map(|s| s.into_iter().collect::<Vec<_>>()).prop_shuffle()
    }

    proptest! {
        #[test]
        fn jaccard_matches_oracle(a in list(), b in list()) {
            let (ra, rb) = (rl(&a), rl(&b));
            prop_assert_eq!(jaccard(&ra, &rb), oracle::jaccard(&a, &b));
            prop_assert_eq!(jaccard(&ra, &rb), jaccard(&rb, &ra));
            if !a.is_empty() {
                prop_assert_eq!(jaccard(&ra, &ra), 1.0);
            }
        }

        #[test]
        fn prag_matches_oracle(a in list(), b in list(), extra in 0usize..3) {
            let (ra, rn) = (rl(&a), rl(&b));
            let num = prag_numerator(&ra, &rn);
            prop_assert_eq!(num, oracle::prag_numerator(&ra, &rn));
            let k = a.len().max(1) + extra;
            let lit = prag_star(&ra, &rn, k, PragVariant::Literal).unwrap();
            let norm = prag_star(&ra, &rn, k, PragVariant::Normalized).unwrap();
            let kf = k as f64;
            prop_assert!((0.0..=(kf - 1.0) / (2.0 * (kf + 1.0)) + 1e-12).contains(&lit));
            prop_assert!((0.0..=1.0).contains(&norm));
            // Integer-numerator identity between the variants.
            prop_assert_eq!((lit * kf * (kf + 1.0)).round(), (norm * kf * (kf - 1.0) / 2.0).round());
        }

        #[test]
        fn filtering_laws(a in list(), rel in prop::collection::hash_set(0u32..50, 0..30), more in prop::collection::hash_set(0u32..50, 0..30)) {
            let r = rl(&a);
            let f = filter_by_preference(&r, &rel);
            prop_assert_eq!(filter_by_preference(&f, &rel), f.clone());
            let sup: HashSet<u32> = rel.union(&more).copied().collect();
            prop_assert_eq!(filter_by_preference(&f, &sup), f.clone());
            prop_assert_eq!(filter_by_preference(&filter_by_preference(&r, &sup), &rel), f.clone());
            prop_assert!(f.items().iter().all(|v| f.rank(*v) == r.rank(*v)));
        }

        #[test]
        fn aggregate_laws(v in prop::collection::vec(0.0f64..1.0, 1..12), c in -1.0f64..1.0, s in 0.0f64..3.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
            prop_assert!(close(snsr(&shifted), snsr(&v), 1e-12));
            prop_assert!(close(snsv(&shifted), snsv(&v), 1e-12));
            prop_assert!(close(snsr(&scaled), s * snsr(&v), 1e-12));
            prop_assert!(close(snsv(&scaled), s * snsv(&v), 1e-12));
            prop_assert!(snsv(&v) <= snsr(&v) + 1e-15);
            if v.len() == 2 {
                prop_assert!(close(snsv(&v), snsr(&v) / 2.0, 1e-15));
            }
        }
    }
}
