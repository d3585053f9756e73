//! Bagged random forest of [`TreeNode`]s.
//!
//! Tree `t` draws all of its randomness (bootstrap rows, per-split feature
//! subsets) from ChaCha stream `t` of the forest seed, so results do not
//! depend on how trees are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::matrix::{DesignMatrix, SparseVector};
use crate::model::ModelError;
use crate::tree::{fit_tree_on_rows, Criterion, TreeNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub seed: u64,
    pub feature_subsample_size: usize,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestOptions {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub seed: u64,
    /// Draw a bootstrap sample per tree; off means every tree sees all rows once.
    pub bootstrap: bool,
    /// Candidate columns per split; `None` means ⌈√d⌉.
    pub feature_subsample: Option<usize>,
}

impl ForestOptions {
    pub fn new(n_estimators: usize, criterion: Criterion, seed: u64) -> Self {
        ForestOptions { n_estimators, criterion, seed, bootstrap: true, feature_subsample: None }
    }
}

/// ⌈√d⌉, at least 1.
pub fn default_subsample(d: usize) -> usize {
    let mut m = (d as f64).sqrt().ceil() as usize;
    while m > 0 && (m - 1) * (m - 1) >= d {
        m -= 1;
    }
    while m * m < d {
        m += 1;
    }
    m.max(1)
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn fit_forest(matrix: &DesignMatrix, n_estimators: usize, criterion: Criterion, seed: u64) -> Result<ForestModel, ModelError> {
    fit_forest_with(matrix, &ForestOptions::new(n_estimators, criterion, seed))
}

pub fn fit_forest_with(matrix: &DesignMatrix, options: &ForestOptions) -> Result<ForestModel, ModelError> {
    if matrix.is_empty() {
        return Err(ModelError::EmptyMatrix);
    }
    if options.n_estimators == 0 {
        return Err(ModelError::InvalidParameter("n_estimators must be at least 1".into()));
    }
    let n = matrix.n_rows();
    let subsample = options.feature_subsample.unwrap_or_else(|| default_subsample(matrix.dimension()));
    let grow_one = |t: usize| {
        let mut rng = tree_rng(options.seed, t);
        let rows: Vec<usize> = if options.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        fit_tree_on_rows(matrix, rows, options.criterion, Some(subsample), &mut rng)
    };

    #[cfg(feature = "parallel")]
    let trees: Result<Vec<TreeNode>, ModelError> = {
        use rayon::prelude::*;
        (0..options.n_estimators).into_par_iter().map(grow_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees: Result<Vec<TreeNode>, ModelError> = (0..options.n_estimators).map(grow_one).collect();

    Ok(ForestModel {
        trees: trees?,
        n_estimators: options.n_estimators,
        criterion: options.criterion,
        seed: options.seed,
        feature_subsample_size: subsample,
        dimension: matrix.dimension(),
    })
}

/// Mode of the labels, ties to `Negative`.
pub fn majority(votes: impl IntoIterator<Item = Label>) -> Label {
    let (pos, neg) = votes.into_iter().fold((0usize, 0usize), |(p, n), l| {
        if l.is_positive() { (p + 1, n) } else { (p, n + 1) }
    });
    if pos > neg {
        Label::Positive
    } else {
        Label::Negative
    }
}

impl ForestModel {
    pub fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        if x.dimension() != self.dimension {
            return Err(ModelError::DimensionMismatch { expected: self.dimension, found: x.dimension() });
        }
        Ok(majority(self.trees.iter().map(|t| t.predict(x))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::fit_tree;
    use Label::{Negative as N, Positive as P};

    fn data(seed: u64, n: usize, d: usize) -> DesignMatrix {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let pos = r.gen_bool(0.35);
            let row: Vec<u8> = (0..d)
                .map(|j| {
                    let p = if j < 3 { if pos { 0.7 } else { 0.1 } } else { 0.3 };
                    u8::from(r.gen_bool(p))
                })
                .collect();
            rows.push(row);
            labels.push(if pos { P } else { N });
        }
        DesignMatrix::from_dense(&rows, labels).unwrap()
    }

    #[test]
    fn subsample_size() {
        assert_eq!(default_subsample(0), 1);
        assert_eq!(default_subsample(1), 1);
        assert_eq!(default_subsample(2), 2);
        assert_eq!(default_subsample(9), 3);
        assert_eq!(default_subsample(10), 4);
        assert_eq!(default_subsample(2010), 45);
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let m = data(1, 60, 10);
        let opts = ForestOptions { bootstrap: false, feature_subsample: Some(10), ..ForestOptions::new(1, Criterion::Gini, 4) };
        let forest = fit_forest_with(&m, &opts).unwrap();
        let tree = fit_tree(&m, Criterion::Gini, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(forest.trees[0], tree.root);
        let q = data(2, 30, 10);
        for x in q.rows() {
            assert_eq!(forest.predict(x).unwrap(), tree.predict(x).unwrap());
        }
    }

    #[test]
    fn mode_of_votes() {
        assert_eq!(majority([P, P, N]), P);
        assert_eq!(majority([P, N]), N);
        assert_eq!(majority([]), N);
    }

    #[test]
    fn hand_tallied_mode_agrees() {
        let m = data(3, 80, 12);
        let forest = fit_forest(&m, 15, Criterion::Gini, 9).unwrap();
        assert_eq!(forest.trees.len(), 15);
        let q = data(4, 10, 12);
        for x in q.rows() {
            let mut pos = 0;
            for t in &forest.trees {
                if t.predict(x) == P {
                    pos += 1;
                }
            }
            let expected = if pos * 2 > 15 { P } else { N };
            assert_eq!(forest.predict(x).unwrap(), expected);
        }
    }

    #[test]
    fn seed_determinism() {
        let m = data(5, 70, 15);
        let a = fit_forest(&m, 10, Criterion::Entropy, 77).unwrap();
        let b = fit_forest(&m, 10, Criterion::Entropy, 77).unwrap();
        assert_eq!(a, b);
        let q = data(6, 25, 15);
        let pa: Vec<_> = q.rows().iter().map(|x| a.predict(x).unwrap()).collect();
        let pb: Vec<_> = q.rows().iter().map(|x| b.predict(x).unwrap()).collect();
        assert_eq!(pa, pb);
    }

    #[test]
    fn errors() {
        let empty = DesignMatrix::new(3, vec![], vec![]).unwrap();
        assert_eq!(fit_forest(&empty, 3, Criterion::Gini, 0), Err(ModelError::EmptyMatrix));
        let m = data(1, 10, 3);
        assert!(fit_forest(&m, 0, Criterion::Gini, 0).is_err());
    }
}
