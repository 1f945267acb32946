use super::{DataError, Interaction};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Train/valid/test proportions as exact rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: Ratio<u64>,
    pub valid: Ratio<u64>,
    pub test: Ratio<u64>,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: Ratio::new(4, 5),
            valid: Ratio::new(1, 10),
            test: Ratio::new(1, 10),
        }
    }
}

impl SplitFractions {
    pub fn new(train: Ratio<u64>, valid: Ratio<u64>, test: Ratio<u64>) -> Result<Self, DataError> {
        let f = SplitFractions { train, valid, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let zero = Ratio::from_integer(0);
        if self.train == zero || self.valid == zero || self.test == zero {
            return Err(DataError::Fractions("every fraction must be positive".into()));
        }
        if self.train + self.valid + self.test != Ratio::from_integer(1) {
            return Err(DataError::Fractions(format!(
                "{} + {} + {} does not sum to 1",
                self.train, self.valid, self.test
            )));
        }
        Ok(())
    }

    /// Part sizes for a user with `n` interactions: `ceil(train·n)` to train,
    /// `ceil(valid·n)` capped by what is left to valid, the rest to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let n_r = Ratio::from_integer(n as u64);
        let train = ((self.train * n_r).ceil().to_integer() as usize).min(n);
        let valid = ((self.valid * n_r).ceil().to_integer() as usize).min(n - train);
        (train, valid, n - train - valid)
    }
}

/// Per-user chronological train/valid/test parts. Users are keyed in id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: BTreeMap<u32, Vec<Interaction>>,
    pub valid: BTreeMap<u32, Vec<Interaction>>,
    pub test: BTreeMap<u32, Vec<Interaction>>,
    pub split_fractions: SplitFractions,
}

impl SplitDataset {
    pub fn train_of(&self, user_id: u32) -> &[Interaction] {
        self.train.get(&user_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn test_of(&self, user_id: u32) -> &[Interaction] {
        self.test.get(&user_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All train interactions, flattened in user order.
    pub fn train_flat(&self) -> Vec<Interaction> {
        self.train.values().flatten().copied().collect()
    }

    pub fn test_flat(&self) -> Vec<Interaction> {
        self.test.values().flatten().copied().collect()
    }

    pub fn valid_flat(&self) -> Vec<Interaction> {
        self.valid.values().flatten().copied().collect()
    }
}

/// Splits every user's history by `(timestamp, item_id)` order.
pub fn split_chronological(
    interactions: &[Interaction],
    fractions: SplitFractions,
) -> Result<SplitDataset, DataError> {
    fractions.validate()?;
    let mut by_user: BTreeMap<u32, Vec<Interaction>> = BTreeMap::new();
    for i in interactions {
        by_user.entry(i.user_id).or_default().push(*i);
    }
    let mut out = SplitDataset {
        train: BTreeMap::new(),
        valid: BTreeMap::new(),
        test: BTreeMap::new(),
        split_fractions: fractions,
    };
    for (user, mut history) in by_user {
        history.sort_by_key(|i| (i.timestamp, i.item_id));
        let (n_train, n_valid, _) = fractions.sizes(history.len());
        let test = history.split_off(n_train + n_valid);
        let valid = history.split_off(n_train);
        out.train.insert(user, history);
        out.valid.insert(user, valid);
        out.test.insert(user, test);
    }
    Ok(out)
}
