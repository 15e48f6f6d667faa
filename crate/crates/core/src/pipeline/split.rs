use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ObservationRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { test_fraction: 0.2, folds: 5, seed: 42 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("test_fraction {} outside (0, 1)", self.test_fraction)));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }
}

/// Sorted row indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Random hold-out of `round(test_fraction · n)` rows, at least one each side.
pub fn split(n: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: n });
    }
    let n_test = ((spec.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let order = shuffled(n, spec.seed);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test })
}

/// Shuffled k-fold partition; the first `n mod k` folds hold one extra row.
/// Each fold's `test` is its validation set.
pub fn kfold(n: usize, folds: usize, seed: u64) -> Result<Vec<Split>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::TooFewRecords { needed: folds, got: n });
    }
    let order = shuffled(n, seed);
    let (base, extra) = (n / folds, n % folds);
    let mut start = 0;
    let mut out = Vec::with_capacity(folds);
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        let mut test = order[start..start + len].to_vec();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
        test.sort_unstable();
        train.sort_unstable();
        out.push(Split { train, test });
        start += len;
    }
    Ok(out)
}

/// Percentage of each partition's rows falling on a calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyShare {
    pub date: NaiveDate,
    pub all_pct: f64,
    pub train_pct: f64,
    pub test_pct: f64,
}

pub fn daily_shares(records: &[ObservationRecord], split: &Split) -> Vec<DailyShare> {
    let mut counts: BTreeMap<NaiveDate, [usize; 3]> = BTreeMap::new();
    for r in records {
        counts.entry(r.time.date()).or_default()[0] += 1;
    }
    for (slot, rows) in [(1, &split.train), (2, &split.test)] {
        for &i in rows {
            counts.entry(records[i].time.date()).or_default()[slot] += 1;
        }
    }
    let pct = |c: usize, total: usize| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
    counts
        .into_iter()
        .map(|(date, [all, train, test])| DailyShare {
            date,
            all_pct: pct(all, records.len()),
            train_pct: pct(train, split.train.len()),
            test_pct: pct(test, split.test.len()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_disjointness() {
        let s = split(10, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split(2, &SplitSpec::default()).unwrap().test.len(), 1);
        assert!(split(1, &SplitSpec::default()).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let spec = SplitSpec::default();
        assert_eq!(split(1000, &spec).unwrap(), split(1000, &spec).unwrap());
        assert_ne!(split(1000, &spec).unwrap(), split(1000, &SplitSpec { seed: 7, ..spec }).unwrap());
    }

    #[test]
    fn kfold_partitions() {
        let folds = kfold(12, 5, 42).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, [3, 3, 2, 2, 2]);
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.train.len() + f.test.len(), 12);
            assert!(f.test.iter().all(|i| f.train.binary_search(i).is_err()));
        }
        assert!(matches!(kfold(4, 5, 0), Err(Error::TooFewRecords { needed: 5, got: 4 })));
    }

    #[test]
    fn spec_validation() {
        assert!(SplitSpec { test_fraction: 1.0, ..Default::default() }.validate().is_err());
        assert!(SplitSpec { folds: 1, ..Default::default() }.validate().is_err());
    }
}
