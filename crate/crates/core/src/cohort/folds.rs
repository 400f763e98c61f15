use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// A k-way partition of record indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    folds: Vec<Vec<usize>>,
    /// Strata smaller than k, reported as `(stratum key, size)`.
    pub underfilled: Vec<(usize, usize)>,
}

impl Folds {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Sorted indices of fold `i`.
    pub fn test(&self, i: usize) -> &[usize] {
        &self.folds[i]
    }

    /// Sorted indices of every fold except `i`.
    pub fn train(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.folds.iter().map(Vec::as_slice)
    }
}

/// Splits `0..strata.len()` into `k` folds, preserving stratum proportions.
///
/// Each stratum is shuffled and dealt round-robin, continuing from the fold
/// where the previous stratum stopped, so per-fold stratum counts and total
/// fold sizes both differ by at most one.
pub fn stratified_kfold(strata: &[usize], k: usize, seed: u64) -> Result<Folds> {
    if k < 2 {
        return Err(Error::Config(format!("k must be >= 2, got {k}")));
    }
    if strata.len() < k {
        return Err(Error::Config(format!(
            "cannot split {} records into {k} folds",
            strata.len()
        )));
    }
    let mut by_stratum: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in strata.iter().enumerate() {
        by_stratum.entry(s).or_default().push(i);
    }
    let mut rng = rng_from(seed);
    let mut folds = vec![Vec::new(); k];
    let mut underfilled = Vec::new();
    let mut next = 0usize;
    for (key, mut members) in by_stratum {
        if members.len() < k {
            underfilled.push((key, members.len()));
        }
        members.shuffle(&mut rng);
        for m in members {
            folds[next].push(m);
            next = (next + 1) % k;
        }
    }
    if !underfilled.is_empty() {
        warn!(
            "{} stratum/strata have fewer than {k} members; their fold counts differ by one",
            underfilled.len()
        );
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(Folds { folds, underfilled })
}
