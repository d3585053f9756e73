//! K-nearest-neighbors over binary vectors with Euclidean distance.
//!
//! The squared distance between binary vectors is the size of the symmetric
//! difference of their active sets, so neighbors are ranked on exact integers.
//! Equidistant neighbors rank by training-row order.

use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::matrix::{DesignMatrix, SparseVector};
use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Distance,
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::Distance => "distance",
        })
    }
}

/// Lazy learner: the training rows themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    rows: Vec<SparseVector>,
    labels: Vec<Label>,
    dimension: usize,
    pub k: usize,
    pub weighting: Weighting,
}

pub fn knn_fit(matrix: &DesignMatrix, k: usize, weighting: Weighting) -> Result<KnnModel, ModelError> {
    if matrix.is_empty() {
        return Err(ModelError::EmptyMatrix);
    }
    if k == 0 {
        return Err(ModelError::InvalidParameter("k must be at least 1".into()));
    }
    if k > matrix.n_rows() {
        return Err(ModelError::KTooLarge { k, rows: matrix.n_rows() });
    }
    Ok(KnnModel {
        rows: matrix.rows().to_vec(),
        labels: matrix.labels().to_vec(),
        dimension: matrix.dimension(),
        k,
        weighting,
    })
}

/// Combines neighbor labels. `Distance` weighs each neighbor by 1/d; any
/// neighbor at distance 0 overrides the rest, and ties among those are
/// settled by uniform vote. Every tie resolves to `Negative`.
pub fn vote(neighbors: &[(f64, Label)], weighting: Weighting) -> Label {
    let tally = |pick: &dyn Fn(f64) -> f64, subset: &mut dyn Iterator<Item = &(f64, Label)>| {
        let (mut pos, mut neg) = (0.0, 0.0);
        for &(d, label) in subset {
            if label.is_positive() {
                pos += pick(d);
            } else {
                neg += pick(d);
            }
        }
        if pos > neg {
            Label::Positive
        } else {
            Label::Negative
        }
    };
    match weighting {
        Weighting::Uniform => tally(&|_| 1.0, &mut neighbors.iter()),
        Weighting::Distance => {
            if neighbors.iter().any(|(d, _)| *d == 0.0) {
                tally(&|_| 1.0, &mut neighbors.iter().filter(|(d, _)| *d == 0.0))
            } else {
                tally(&|d| 1.0 / d, &mut neighbors.iter())
            }
        }
    }
}

impl KnnModel {
    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The `k` nearest stored rows as `(row index, squared distance)`.
    pub fn neighbors(&self, x: &SparseVector) -> Result<Vec<(usize, usize)>, ModelError> {
        if x.dimension() != self.dimension {
            return Err(ModelError::DimensionMismatch { expected: self.dimension, found: x.dimension() });
        }
        let mut all: Vec<(usize, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.squared_distance(x)))
            .collect();
        all.sort_by_key(|&(i, d)| (d, i));
        all.truncate(self.k);
        Ok(all)
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        let near: Vec<(f64, Label)> = self
            .neighbors(x)?
            .into_iter()
            .map(|(i, d2)| ((d2 as f64).sqrt(), self.labels[i]))
            .collect();
        Ok(vote(&near, self.weighting))
    }
}
