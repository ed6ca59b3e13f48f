use std::collections::BTreeMap;

use crate::corpus::ServiceRecord;
use crate::error::{Error, Result};
use crate::rng;

/// Assignment of every record to one of `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// Record ids in input order.
    pub ids: Vec<String>,
    /// Fold of the record at the same position in `ids`.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn fold_of_id(&self, id: &str) -> Option<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.fold_of[i])
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    /// Indices (into the record list) of the members of `fold`.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn as_map(&self) -> BTreeMap<&str, usize> {
        self.ids
            .iter()
            .map(|s| s.as_str())
            .zip(self.fold_of.iter().copied())
            .collect()
    }
}

/// Stratified k-fold assignment.
///
/// Records are grouped by department (unlabeled records form their own
/// group), each group is shuffled with the seeded generator, and the groups
/// are dealt round-robin into folds as one continuous sequence. Fold sizes
/// therefore differ by at most one overall and per department.
pub fn split_folds(records: &[ServiceRecord], k: usize, seed: u64) -> Result<FoldAssignment> {
    let keys: Vec<Option<usize>> = records
        .iter()
        .map(|r| r.department.map(|d| d.index()))
        .collect();
    split_folds_by_key(
        records.iter().map(|r| r.id.clone()).collect(),
        &keys,
        k,
        seed,
    )
}

/// Stratified k-fold assignment over arbitrary group keys, dealt the same
/// way as [`split_folds`].
pub fn split_folds_by_key(
    ids: Vec<String>,
    keys: &[Option<usize>],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::config(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if ids.len() != keys.len() {
        return Err(Error::Mismatch(format!(
            "{} ids for {} keys",
            ids.len(),
            keys.len()
        )));
    }
    if ids.len() < k {
        return Err(Error::input(format!(
            "cannot split {} records into {k} folds",
            ids.len()
        )));
    }
    let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        groups.entry(*key).or_default().push(i);
    }
    let mut rng = rng::seeded(seed);
    let mut fold_of = vec![0; ids.len()];
    let mut next = 0usize;
    for members in groups.values_mut() {
        rng::shuffle(&mut rng, members);
        for &i in members.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, ids, fold_of })
}
