//! Discrete AdaBoost over decision stumps on binary features.
//!
//! Labels are encoded +1 (positive) / −1 (negative). A stump on feature `j`
//! with polarity `s` outputs `s` when the feature is present and `−s`
//! otherwise.

use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::matrix::{DesignMatrix, SparseVector};
use crate::model::ModelError;

/// Floor used in place of a zero weighted error when computing α.
pub const EPSILON_MIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: u32,
    pub polarity: i8,
}

impl Stump {
    pub fn output(&self, x: &SparseVector) -> f64 {
        let s = f64::from(self.polarity);
        if x.contains(self.feature) { s } else { -s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    /// Weighted error ε_t of each retained stump.
    pub training_errors: Vec<f64>,
    pub dimension: usize,
}

/// α = ½ ln((1 − ε)/ε).
pub fn stump_alpha(epsilon: f64) -> f64 {
    0.5 * ((1.0 - epsilon) / epsilon).ln()
}

/// Sample weights before round 1 and after every retained round.
pub type WeightHistory = Vec<Vec<f64>>;

/// Lowest-error stump under `weights`; ties go to the lowest feature, then
/// polarity +1. Returns the stump and its exact weighted error.
fn best_stump(matrix: &DesignMatrix, weights: &[f64]) -> Option<(Stump, f64)> {
    let d = matrix.dimension();
    if d == 0 {
        return None;
    }
    let mut w_present = vec![[0.0f64; 2]; d];
    let mut n_present = vec![[0usize; 2]; d];
    let mut w_class = [0.0f64; 2];
    let mut n_class = [0usize; 2];
    for (i, row) in matrix.rows().iter().enumerate() {
        let cls = usize::from(matrix.label(i).is_positive());
        w_class[cls] += weights[i];
        n_class[cls] += 1;
        for &c in row.active() {
            w_present[c as usize][cls] += weights[i];
            n_present[c as usize][cls] += 1;
        }
    }
    let mut best: Option<(Stump, f64)> = None;
    for j in 0..d {
        // polarity +1 errs on present negatives and absent positives
        let plus = w_present[j][0] + (w_class[1] - w_present[j][1]);
        let plus_misses = n_present[j][0] + (n_class[1] - n_present[j][1]);
        let minus = w_present[j][1] + (w_class[0] - w_present[j][0]);
        let minus_misses = n_present[j][1] + (n_class[0] - n_present[j][0]);
        for (polarity, err, misses) in [(1i8, plus, plus_misses), (-1, minus, minus_misses)] {
            let err = if misses == 0 { 0.0 } else { err.max(0.0) };
            if best.is_none_or(|(_, e)| err < e) {
                best = Some((Stump { feature: j as u32, polarity }, err));
            }
        }
    }
    // recompute the winner's error directly from its misclassified rows
    best.map(|(stump, approx)| {
        let exact: f64 = matrix
            .rows()
            .iter()
            .enumerate()
            .filter(|(i, x)| stump.output(x) != matrix.label(*i).sign())
            .map(|(i, _)| weights[i])
            .sum();
        (stump, if approx == 0.0 { 0.0 } else { exact })
    })
}

pub fn fit_adaboost(matrix: &DesignMatrix, n_estimators: usize) -> Result<AdaBoostModel, ModelError> {
    fit_adaboost_traced(matrix, n_estimators).map(|(m, _)| m)
}

/// As [`fit_adaboost`], also returning the normalized sample weights after
/// each round.
pub fn fit_adaboost_traced(matrix: &DesignMatrix, n_estimators: usize) -> Result<(AdaBoostModel, WeightHistory), ModelError> {
    if n_estimators == 0 {
        return Err(ModelError::InvalidParameter("n_estimators must be at least 1".into()));
    }
    if !matrix.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    let n = matrix.n_rows();
    let mut weights = vec![1.0 / n as f64; n];
    let mut history = vec![weights.clone()];
    let mut model = AdaBoostModel {
        stumps: Vec::new(),
        alphas: Vec::new(),
        training_errors: Vec::new(),
        dimension: matrix.dimension(),
    };
    for _ in 0..n_estimators {
        let Some((stump, epsilon)) = best_stump(matrix, &weights) else {
            break;
        };
        if epsilon >= 0.5 {
            break;
        }
        let perfect = epsilon == 0.0;
        let alpha = stump_alpha(if perfect { EPSILON_MIN } else { epsilon });
        model.stumps.push(stump);
        model.alphas.push(alpha);
        model.training_errors.push(epsilon);
        if perfect {
            break;
        }
        for (i, w) in weights.iter_mut().enumerate() {
            *w *= (-alpha * matrix.label(i).sign() * stump.output(matrix.row(i))).exp();
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        history.push(weights.clone());
    }
    if model.stumps.is_empty() {
        return Err(ModelError::NoUsefulStump);
    }
    Ok((model, history))
}

impl AdaBoostModel {
    /// Σ α_t h_t(x).
    pub fn score(&self, x: &SparseVector) -> Result<f64, ModelError> {
        if x.dimension() != self.dimension {
            return Err(ModelError::DimensionMismatch { expected: self.dimension, found: x.dimension() });
        }
        Ok(self.stumps.iter().zip(&self.alphas).map(|(s, a)| a * s.output(x)).sum())
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        Ok(if self.score(x)? > 0.0 { Label::Positive } else { Label::Negative })
    }

    /// The model truncated to its first `rounds` stumps.
    pub fn prefix(&self, rounds: usize) -> AdaBoostModel {
        let r = rounds.min(self.stumps.len());
        AdaBoostModel {
            stumps: self.stumps[..r].to_vec(),
            alphas: self.alphas[..r].to_vec(),
            training_errors: self.training_errors[..r].to_vec(),
            dimension: self.dimension,
        }
    }
}
