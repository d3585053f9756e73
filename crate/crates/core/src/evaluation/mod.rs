//! F1 scoring, stratified k-fold assignment, cross-validation, and exhaustive
//! grid search.

mod cv;
mod grid;

pub use cv::{cross_validate, fold_seed, prepare_folds, CvError, CvOutcome, FoldData, PreparedFolds, SelectionPlacement};
pub use cv::prepare_folds_with;
pub use grid::{grid_search, Axis, ConfigScore, EvalReport, GridError, ParamGrid, ParamValue};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::Label;

/// Confusion counts with `Positive` as the target class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn record(&mut self, actual_positive: bool, predicted_positive: bool) {
        match (actual_positive, predicted_positive) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_labels(actual: &[Label], predicted: &[Label]) -> Self {
        let mut c = ConfusionCounts::default();
        for (a, p) in actual.iter().zip(predicted) {
            c.record(a.is_positive(), p.is_positive());
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; zero denominators count as 0.
pub fn f1_score(counts: &ConfusionCounts) -> f64 {
    let (p, r) = (counts.precision(), counts.recall());
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FoldError {
    #[error("k must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("class {class} has {count} members, fewer than the fold count")]
    TooFewPerClass { class: Label, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// `(train, test)` row indices for `fold`, each increasing.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != fold)
    }
}

/// Shuffles each class with `seed`, then deals its members round-robin into
/// `k` folds. Negatives continue the deal where positives stopped so fold
/// sizes stay within one of each other as well.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<FoldAssignment, FoldError> {
    if k < 2 {
        return Err(FoldError::TooFewFolds(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut offset = 0;
    for class in [Label::Positive, Label::Negative] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(FoldError::TooFewPerClass { class, count: members.len() });
        }
        members.shuffle(&mut rng);
        for (j, &row) in members.iter().enumerate() {
            fold_of[row] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&ConfusionCounts::new(10, 0, 0, 5)), 1.0);
        assert_eq!(f1_score(&ConfusionCounts::new(0, 3, 5, 0)), 0.0);
        let c = ConfusionCounts::new(6, 2, 3, 0);
        assert!((c.precision() - 0.75).abs() < 1e-12);
        assert!((c.recall() - 6.0 / 9.0).abs() < 1e-12);
        // 2·0.75·(2/3) / (0.75 + 2/3) = 12/17
        assert!((f1_score(&c) - 12.0 / 17.0).abs() < 1e-12);
        assert!((f1_score(&c) - 0.705882).abs() < 1e-6);
        assert_eq!(f1_score(&ConfusionCounts::default()), 0.0);
    }

    #[test]
    fn folds_for_reference_cohort() {
        let labels: Vec<Label> = std::iter::repeat_n(Label::Positive, 73)
            .chain(std::iter::repeat_n(Label::Negative, 197))
            .collect();
        let a = stratified_kfold(&labels, 10, 7).unwrap();
        for f in 0..10 {
            let test = a.test_indices(f);
            let pos = test.iter().filter(|&&i| labels[i].is_positive()).count();
            assert!((7..=8).contains(&pos));
            assert!((19..=20).contains(&(test.len() - pos)));
        }
        assert_eq!(a, stratified_kfold(&labels, 10, 7).unwrap());
    }

    #[test]
    fn exact_two_fold_split() {
        let labels = [Label::Positive, Label::Positive, Label::Negative, Label::Negative];
        let a = stratified_kfold(&labels, 2, 0).unwrap();
        for f in 0..2 {
            let test = a.test_indices(f);
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().filter(|&&i| labels[i].is_positive()).count(), 1);
        }
    }

    #[test]
    fn fold_preconditions() {
        let labels = [Label::Positive, Label::Negative, Label::Negative];
        assert_eq!(
            stratified_kfold(&labels, 2, 0),
            Err(FoldError::TooFewPerClass { class: Label::Positive, count: 1 })
        );
        assert_eq!(stratified_kfold(&labels, 1, 0), Err(FoldError::TooFewFolds(1)));
    }

    proptest! {
        #[test]
        fn f1_bounds(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let f = f1_score(&ConfusionCounts::new(tp, fp, fn_, 0));
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f == 1.0, fp == 0 && fn_ == 0 && tp > 0);
        }

        #[test]
        fn fold_partition_invariants(npos in 2usize..40, nneg in 2usize..80, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(npos >= k && nneg >= k);
            let labels: Vec<Label> = (0..npos + nneg)
                .map(|i| if i % 3 == 0 && i / 3 < npos { Label::Positive } else { Label::Negative })
                .collect();
            let (p, n) = (labels.iter().filter(|l| l.is_positive()).count(), labels.iter().filter(|l| !l.is_positive()).count());
            prop_assume!(p >= k && n >= k);
            let a = stratified_kfold(&labels, k, seed).unwrap();
            prop_assert!(a.fold_of.iter().all(|&f| f < k));
            let mut pos_counts = vec![0; k];
            let mut neg_counts = vec![0; k];
            for (i, &f) in a.fold_of.iter().enumerate() {
                if labels[i].is_positive() { pos_counts[f] += 1 } else { neg_counts[f] += 1 }
            }
            for counts in [&pos_counts, &neg_counts] {
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
                prop_assert!(*lo >= 1);
            }
            let total: usize = (0..k).map(|f| a.test_indices(f).len()).sum();
            prop_assert_eq!(total, labels.len());
        }
    }
}
