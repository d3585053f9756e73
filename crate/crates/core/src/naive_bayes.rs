//! Bernoulli naive Bayes with additive smoothing.

use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::matrix::{DesignMatrix, SparseVector};
use crate::model::ModelError;

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Per-class log prior and per-feature log likelihoods of presence and
/// absence. Index 0 is `Negative`, index 1 is `Positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub log_prior: [f64; 2],
    pub log_likelihood_present: [Vec<f64>; 2],
    pub log_likelihood_absent: [Vec<f64>; 2],
    pub smoothing_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbPrediction {
    pub label: Label,
    pub posterior_positive: f64,
    pub posterior_negative: f64,
}

fn class_index(label: Label) -> usize {
    match label {
        Label::Negative => 0,
        Label::Positive => 1,
    }
}

/// P(present | c) = (present_c + α) / (n_c + 2α).
pub fn nb_fit(matrix: &DesignMatrix, smoothing_alpha: f64) -> Result<NbModel, ModelError> {
    if !(smoothing_alpha > 0.0 && smoothing_alpha.is_finite()) {
        return Err(ModelError::InvalidParameter("smoothing alpha must be positive".into()));
    }
    if !matrix.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    let d = matrix.dimension();
    let mut class_n = [0usize; 2];
    let mut present = [vec![0usize; d], vec![0usize; d]];
    for (row, &label) in matrix.rows().iter().zip(matrix.labels()) {
        let c = class_index(label);
        class_n[c] += 1;
        for &col in row.active() {
            present[c][col as usize] += 1;
        }
    }
    let n = matrix.n_rows() as f64;
    let a = smoothing_alpha;
    let mut lp = [Vec::with_capacity(d), Vec::with_capacity(d)];
    let mut la = [Vec::with_capacity(d), Vec::with_capacity(d)];
    for c in 0..2 {
        let denom = class_n[c] as f64 + 2.0 * a;
        for &count in &present[c] {
            lp[c].push(((count as f64 + a) / denom).ln());
            la[c].push((((class_n[c] - count) as f64 + a) / denom).ln());
        }
    }
    Ok(NbModel {
        log_prior: [(class_n[0] as f64 / n).ln(), (class_n[1] as f64 / n).ln()],
        log_likelihood_present: lp,
        log_likelihood_absent: la,
        smoothing_alpha,
    })
}

impl NbModel {
    pub fn dimension(&self) -> usize {
        self.log_likelihood_present[0].len()
    }

    /// Unnormalized log posterior of each class.
    pub fn log_joint(&self, x: &SparseVector) -> Result<[f64; 2], ModelError> {
        if x.dimension() != self.dimension() {
            return Err(ModelError::DimensionMismatch { expected: self.dimension(), found: x.dimension() });
        }
        let mut out = [0.0; 2];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut acc = self.log_prior[c];
            let active = x.active();
            let mut next = 0;
            for j in 0..self.dimension() {
                if next < active.len() && active[next] as usize == j {
                    acc += self.log_likelihood_present[c][j];
                    next += 1;
                } else {
                    acc += self.log_likelihood_absent[c][j];
                }
            }
            *slot = acc;
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<NbPrediction, ModelError> {
        let [neg, pos] = self.log_joint(x)?;
        let top = neg.max(pos);
        let (en, ep) = ((neg - top).exp(), (pos - top).exp());
        let posterior_positive = ep / (en + ep);
        Ok(NbPrediction {
            label: if pos > neg { Label::Positive } else { Label::Negative },
            posterior_positive,
            posterior_negative: en / (en + ep),
        })
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        Ok(self.predict_proba(x)?.label)
    }
}
