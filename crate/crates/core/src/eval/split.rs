use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold assignment that never separates samples of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSplit {
    pub fold_assignments: Vec<usize>,
    pub groups: Vec<String>,
    pub k: usize,
}

impl GroupedSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_assignments.len())
            .filter(|&i| self.fold_assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_assignments.len())
            .filter(|&i| self.fold_assignments[i] != fold)
            .collect()
    }
}

/// Distinct groups in order of first appearance.
pub(crate) fn distinct<'a>(groups: impl IntoIterator<Item = &'a String>) -> Vec<&'a String> {
    let mut seen = std::collections::HashSet::new();
    groups.into_iter().filter(|g| seen.insert(*g)).collect()
}

/// Shuffle the distinct groups with `seed` and deal them round-robin to `k`
/// folds.
pub fn grouped_kfold(groups: &[String], k: usize, seed: u64) -> Result<GroupedSplit> {
    if k < 2 {
        return Err(Error::Split(format!("need at least 2 folds, got {k}")));
    }
    let mut uniq = distinct(groups);
    if uniq.len() < k {
        return Err(Error::Split(format!(
            "{} distinct groups cannot fill {k} folds",
            uniq.len()
        )));
    }
    uniq.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: std::collections::HashMap<&String, usize> =
        uniq.iter().enumerate().map(|(i, g)| (*g, i % k)).collect();
    Ok(GroupedSplit {
        fold_assignments: groups.iter().map(|g| fold_of[g]).collect(),
        groups: groups.to_vec(),
        k,
    })
}

/// One grouped holdout split of `indices`: roughly `fraction` of the groups
/// go to validation. Returns `None` with fewer than two groups.
pub(crate) fn grouped_holdout(
    indices: &[usize],
    groups: &[String],
    fraction: f64,
    seed: u64,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut uniq = distinct(indices.iter().map(|&i| &groups[i]));
    if uniq.len() < 2 {
        return None;
    }
    uniq.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((uniq.len() as f64 * fraction).round() as usize).clamp(1, uniq.len() - 1);
    let val: std::collections::HashSet<&String> = uniq[..n_val].iter().copied().collect();
    let (v, t): (Vec<usize>, Vec<usize>) = indices.iter().partition(|&&i| val.contains(&groups[i]));
    Some((t, v))
}
