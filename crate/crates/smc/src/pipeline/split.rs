//! Stratified cross-validation fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cross-validation fold: disjoint train and test index lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// The full fold assignment for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub fold_count: usize,
    /// Fraction of samples used as the labeled training split in each fold;
    /// always `1 - 1/fold_count`.
    pub labeled_fraction: f64,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Assigns samples to `fold_count` test folds, stratified by class: within
/// each class the indices are shuffled once and dealt round-robin, so every
/// fold's class proportions match the corpus within one sample. Each fold's
/// training set is the complement of its test set.
pub fn stratified_folds(labels: &[usize], fold_count: usize, seed: u64) -> Result<SplitPlan> {
    if fold_count < 2 {
        return Err(Error::invalid(format!(
            "at least 2 folds are required, got {fold_count}"
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("cannot split zero samples"));
    }
    let max_label = *labels.iter().max().expect("labels is non-empty");
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); max_label + 1];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < fold_count {
            return Err(Error::invalid(format!(
                "class {class} has {} samples but {fold_count} folds need at least {fold_count}",
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_sets: Vec<Vec<usize>> = vec![Vec::new(); fold_count];
    for members in by_class.iter() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (i, &sample) in shuffled.iter().enumerate() {
            test_sets[i % fold_count].push(sample);
        }
    }

    let n = labels.len();
    let folds = test_sets
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let in_test: std::collections::BTreeSet<usize> = test.iter().copied().collect();
            let train: Vec<usize> = (0..n).filter(|i| !in_test.contains(i)).collect();
            Fold { train, test }
        })
        .collect();

    Ok(SplitPlan {
        fold_count,
        labeled_fraction: 1.0 - 1.0 / fold_count as f64,
        seed,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_divisibility_gives_one_test_sample_per_class_per_fold() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let plan = stratified_folds(&labels, 5, 0).unwrap();
        assert_eq!(plan.folds.len(), 5);
        for fold in &plan.folds {
            assert_eq!(fold.test.len(), 2);
            let classes: Vec<usize> = fold.test.iter().map(|&i| labels[i]).collect();
            assert!(classes.contains(&0) && classes.contains(&1));
            assert_eq!(fold.train.len(), 8);
        }
    }

    #[test]
    fn test_sets_partition_all_indices() {
        let labels: Vec<usize> = (0..15).map(|i| i / 5).collect();
        let plan = stratified_folds(&labels, 5, 3).unwrap();
        let mut seen = vec![false; 15];
        for fold in &plan.folds {
            for &i in &fold.test {
                assert!(!seen[i], "index {i} appears in two test sets");
                seen[i] = true;
            }
            for &i in &fold.train {
                assert!(!fold.test.contains(&i));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn same_seed_reproduces_same_folds() {
        let labels: Vec<usize> = (0..37).map(|i| i % 3).collect();
        let a = stratified_folds(&labels, 5, 42).unwrap();
        let b = stratified_folds(&labels, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = stratified_folds(&labels, 5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uneven_classes_stay_within_one_sample_of_proportions() {
        let mut labels = vec![0usize; 23];
        labels.extend(vec![1usize; 11]);
        labels.extend(vec![2usize; 17]);
        let plan = stratified_folds(&labels, 5, 9).unwrap();
        for fold in &plan.folds {
            for class in 0..3 {
                let class_total = labels.iter().filter(|&&l| l == class).count();
                let in_fold = fold.test.iter().filter(|&&i| labels[i] == class).count();
                let ideal = class_total as f64 / 5.0;
                assert!(
                    (in_fold as f64 - ideal).abs() <= 1.0,
                    "class {class}: {in_fold} in fold vs ideal {ideal}"
                );
            }
        }
    }

    #[test]
    fn labeled_fraction_tracks_fold_count() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        assert_eq!(stratified_folds(&labels, 5, 0).unwrap().labeled_fraction, 0.8);
        assert_eq!(stratified_folds(&labels, 4, 0).unwrap().labeled_fraction, 0.75);
    }

    #[test]
    fn small_class_is_rejected() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1];
        assert!(stratified_folds(&labels, 5, 0).is_err());
        assert!(stratified_folds(&labels, 1, 0).is_err());
    }
}
