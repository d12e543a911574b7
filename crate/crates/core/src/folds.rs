//! Deterministic K-fold assignment.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::types::Error;

/// Assignment of `n` observations to `folds` cross-validation folds.
///
/// Built by a seeded uniform permutation split into contiguous blocks; the
/// first `n % folds` folds receive the extra element, so fold sizes differ by
/// at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    n: usize,
    fold_of: Vec<usize>,
    folds: usize,
    seed: u64,
    /// Reserved; stratified assignment is not implemented in this crate.
    pub stratified: bool,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_folds(&self) -> usize {
        self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fold index of observation `i`.
    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.fold_of
    }

    /// Observation indices in fold `j`, in ascending order.
    pub fn fold_indices(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold_of[i] == j).collect()
    }

    /// Observation indices not in fold `j`, in ascending order.
    pub fn complement_indices(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.fold_of[i] != j).collect()
    }
}

/// Splits `n` observations into `folds` folds via a seeded permutation.
pub fn make_folds(n: usize, folds: usize, seed: u64) -> Result<FoldPlan, Error> {
    if folds < 2 || n < folds {
        return Err(Error::BadFoldCount { n, folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = n / folds;
    let extra = n % folds;
    let mut fold_of = alloc::vec![0usize; n];
    let mut pos = 0;
    for j in 0..folds {
        let size = base + usize::from(j < extra);
        for &i in &order[pos..pos + size] {
            fold_of[i] = j;
        }
        pos += size;
    }
    Ok(FoldPlan {
        n,
        fold_of,
        folds,
        seed,
        stratified: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(plan: &FoldPlan) -> Vec<usize> {
        (0..plan.num_folds())
            .map(|j| plan.fold_indices(j).len())
            .collect()
    }

    #[test]
    fn exact_division() {
        let plan = make_folds(10, 5, 1).unwrap();
        assert_eq!(sizes(&plan), alloc::vec![2, 2, 2, 2, 2]);
    }

    #[test]
    fn remainder_goes_to_first_folds() {
        let plan = make_folds(12, 5, 1).unwrap();
        assert_eq!(sizes(&plan), alloc::vec![3, 3, 2, 2, 2]);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = make_folds(37, 5, 99).unwrap();
        let b = make_folds(37, 5, 99).unwrap();
        assert_eq!(a.assignments(), b.assignments());
        let c = make_folds(37, 5, 100).unwrap();
        assert_ne!(a.assignments(), c.assignments());
    }

    #[test]
    fn partition_property() {
        let plan = make_folds(23, 4, 7).unwrap();
        let mut seen = alloc::vec![false; 23];
        for j in 0..4 {
            for i in plan.fold_indices(j) {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let total: usize = sizes(&plan).iter().sum();
        assert_eq!(total, 23);
    }

    #[test]
    fn rejects_too_few_observations() {
        assert!(matches!(
            make_folds(4, 5, 0),
            Err(Error::BadFoldCount { n: 4, folds: 5 })
        ));
        assert!(make_folds(3, 1, 0).is_err());
    }
}
