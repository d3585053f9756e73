//! Two-stage feature selection: drop near-constant columns, then fit an
//! L1-penalized logistic regression and keep the columns with nonzero weight.
//!
//! The solver is cyclic coordinate descent on
//!
//! ```text
//! (1/n) Σ_i [log(1 + exp(η_i)) − y_i η_i] + λ Σ_j |w_j|,   η_i = b + Σ_j w_j x_ij
//! ```
//!
//! with y ∈ {0, 1} (positive = 1) and an unpenalized intercept `b`. Each
//! coordinate takes a soft-thresholded Newton step; if that step fails to
//! lower the objective it falls back to the majorize-minimize step built
//! from the global curvature bound σ' ≤ 1/4, which always does. The objective
//! is therefore non-increasing across sweeps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{f1_score, stratified_kfold, ConfusionCounts};
use crate::matrix::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Columns whose majority value covers at least this share of rows are dropped.
    pub majority_threshold: f64,
    pub lambda: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the largest coordinate update in a sweep.
    pub tolerance: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            majority_threshold: 0.85,
            lambda: 0.01,
            max_iterations: 5_000,
            tolerance: 1e-7,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.majority_threshold > 0.5 && self.majority_threshold <= 1.0) {
            return Err(SelectionError::InvalidConfig("majority_threshold must lie in (0.5, 1]".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SelectionError::InvalidConfig("lambda must be a finite value ≥ 0".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(SelectionError::InvalidConfig("tolerance must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(SelectionError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("design matrix has no rows")]
    EmptyMatrix,
    #[error("L1 selection needs both classes present")]
    SingleClass,
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Columns (of the fitted matrix) with nonzero weight, increasing.
    pub kept_columns: Vec<u32>,
    /// Weight of each kept column, aligned with `kept_columns`.
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Objective value after each sweep.
    pub objective_trace: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// False when `max_iterations` ran out first; the result is then the
    /// last iterate.
    pub converged: bool,
}

impl SelectionResult {
    /// Dense weight vector over `dimension` columns.
    pub fn full_weights(&self, dimension: usize) -> Vec<f64> {
        let mut w = vec![0.0; dimension];
        for (&c, &v) in self.kept_columns.iter().zip(&self.weights) {
            w[c as usize] = v;
        }
        w
    }

    /// Linear predictor b + Σ w_j x_j for one row.
    pub fn decision(&self, row: &crate::matrix::SparseVector) -> f64 {
        let mut eta = self.intercept;
        let (mut i, mut j) = (0, 0);
        let active = row.active();
        while i < active.len() && j < self.kept_columns.len() {
            match active[i].cmp(&self.kept_columns[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    eta += self.weights[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        eta
    }
}

/// Column ids whose majority-value frequency is below `majority_threshold`.
pub fn near_constant_filter(matrix: &DesignMatrix, majority_threshold: f64) -> Result<Vec<u32>, SelectionError> {
    if matrix.is_empty() {
        return Err(SelectionError::EmptyMatrix);
    }
    let n = matrix.n_rows() as f64;
    Ok(matrix
        .column_counts()
        .into_iter()
        .enumerate()
        .filter(|&(_, ones)| {
            let majority = ones.max(matrix.n_rows() - ones) as f64;
            majority / n < majority_threshold
        })
        .map(|(c, _)| c as u32)
        .collect())
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^η), stable for large |η|.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Gradient of the smooth part at `w = 0` with the intercept at the logit of
/// the positive rate. Any λ at or above its largest magnitude zeroes every
/// weight.
pub fn lambda_max(matrix: &DesignMatrix) -> Result<f64, SelectionError> {
    let (pos, neg) = matrix.class_counts();
    if pos == 0 || neg == 0 {
        return Err(SelectionError::SingleClass);
    }
    let n = matrix.n_rows() as f64;
    let p = pos as f64 / n;
    let cols = matrix.column_rows();
    Ok(cols
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|&i| p - matrix.label(i as usize).indicator())
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max))
}

/// Fits the penalized logistic model on every column of `matrix`.
pub fn l1_logistic_select(matrix: &DesignMatrix, config: &SelectionConfig) -> Result<SelectionResult, SelectionError> {
    config.validate()?;
    if matrix.is_empty() {
        return Err(SelectionError::EmptyMatrix);
    }
    let (pos, neg) = matrix.class_counts();
    if pos == 0 || neg == 0 {
        return Err(SelectionError::SingleClass);
    }
    let n = matrix.n_rows();
    let inv_n = 1.0 / n as f64;
    let lambda = config.lambda;
    let y: Vec<f64> = matrix.labels().iter().map(|l| l.indicator()).collect();
    let cols = matrix.column_rows();

    let rate = pos as f64 * inv_n;
    let mut intercept = (rate / (1.0 - rate)).ln();
    let mut weights = vec![0.0; matrix.dimension()];
    let mut eta = vec![intercept; n];

    let objective = |eta: &[f64], weights: &[f64]| {
        let loss: f64 = eta.iter().zip(&y).map(|(&e, &yi)| softplus(e) - yi * e).sum::<f64>() * inv_n;
        loss + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut max_step: f64 = 0.0;

        // intercept, over all rows
        {
            let (mut g, mut h) = (0.0, 0.0);
            for (e, yi) in eta.iter().zip(&y) {
                let p = sigmoid(*e);
                g += p - yi;
                h += p * (1.0 - p);
            }
            g *= inv_n;
            h *= inv_n;
            let loss_at = |delta: f64| -> f64 {
                eta.iter()
                    .zip(&y)
                    .map(|(&e, &yi)| (softplus(e + delta) - yi * (e + delta)) - (softplus(e) - yi * e))
                    .sum::<f64>()
                    * inv_n
            };
            let mut delta = if h > 1e-12 { -g / h } else { 0.0 };
            if delta != 0.0 && loss_at(delta) > 0.0 {
                delta = -g / 0.25;
            }
            if delta != 0.0 {
                intercept += delta;
                eta.iter_mut().for_each(|e| *e += delta);
                max_step = max_step.max(delta.abs());
            }
        }

        for (j, rows) in cols.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let (mut g, mut h) = (0.0, 0.0);
            for &i in rows {
                let p = sigmoid(eta[i as usize]);
                g += p - y[i as usize];
                h += p * (1.0 - p);
            }
            g *= inv_n;
            h *= inv_n;
            let w = weights[j];
            let change = |delta: f64| -> f64 {
                let dloss: f64 = rows
                    .iter()
                    .map(|&i| {
                        let (e, yi) = (eta[i as usize], y[i as usize]);
                        (softplus(e + delta) - yi * (e + delta)) - (softplus(e) - yi * e)
                    })
                    .sum::<f64>()
                    * inv_n;
                dloss + lambda * ((w + delta).abs() - w.abs())
            };
            let mut delta = 0.0;
            if h > 1e-12 {
                delta = soft_threshold(w - g / h, lambda / h) - w;
                if delta != 0.0 && change(delta) > 0.0 {
                    delta = 0.0;
                }
            }
            if delta == 0.0 {
                let bound = 0.25 * rows.len() as f64 * inv_n;
                delta = soft_threshold(w - g / bound, lambda / bound) - w;
            }
            if delta != 0.0 {
                weights[j] = w + delta;
                for &i in rows {
                    eta[i as usize] += delta;
                }
                max_step = max_step.max(delta.abs());
            }
        }

        trace.push(objective(&eta, &weights));
        if max_step < config.tolerance {
            converged = true;
            break;
        }
    }

    let kept_columns: Vec<u32> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(j, _)| j as u32)
        .collect();
    let kept_weights = kept_columns.iter().map(|&j| weights[j as usize]).collect();
    Ok(SelectionResult {
        kept_columns,
        weights: kept_weights,
        intercept,
        objective_trace: trace,
        lambda,
        iterations,
        converged,
    })
}

/// Outcome of the full two-stage selection on one training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Columns surviving the near-constant filter.
    pub filtered: Vec<u32>,
    /// L1 fit over the filtered columns, with `kept_columns` mapped back to
    /// the input matrix's column ids.
    pub result: SelectionResult,
    /// Final column mask handed to the classifiers.
    pub mask: Vec<u32>,
}

/// How λ is picked by [`select_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Fixed(f64),
    /// Cross-validated F1 of the penalized logistic classifier over the grid;
    /// ties go to the larger λ.
    Auto { grid: Vec<f64>, folds: usize },
}

pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [0.0001, 0.001, 0.01, 0.1];

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Auto { grid: DEFAULT_LAMBDA_GRID.to_vec(), folds: 5 }
    }
}

/// Mean held-out F1 of the penalized logistic classifier at each λ in `grid`.
pub fn lambda_cv_scores(
    matrix: &DesignMatrix,
    config: &SelectionConfig,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>, SelectionError> {
    let assignment = stratified_kfold(matrix.labels(), folds, seed).map_err(|_| SelectionError::SingleClass)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = SelectionConfig { lambda, ..config.clone() };
        let mut total = 0.0;
        for fold in 0..assignment.k {
            let (train_idx, test_idx) = assignment.split(fold);
            let fit = l1_logistic_select(&matrix.select_rows(&train_idx), &cfg)?;
            let mut counts = ConfusionCounts::default();
            for &i in &test_idx {
                let predicted = fit.decision(matrix.row(i)) > 0.0;
                counts.record(matrix.label(i).is_positive(), predicted);
            }
            total += f1_score(&counts);
        }
        scores.push(total / assignment.k as f64);
    }
    Ok(scores)
}

/// Filter, then L1-select. If λ is automatic it is tuned by an inner
/// stratified CV on `matrix` alone. When the L1 stage zeroes every weight the
/// filtered columns are used instead, and when the filter removes everything
/// all columns are used, so classifiers always see at least the filter output.
pub fn select_features(
    matrix: &DesignMatrix,
    config: &SelectionConfig,
    lambda: &LambdaChoice,
    seed: u64,
) -> Result<FeatureSelection, SelectionError> {
    config.validate()?;
    let filtered = near_constant_filter(matrix, config.majority_threshold)?;
    let reduced = matrix.project_columns(&filtered);
    let chosen = match lambda {
        LambdaChoice::Fixed(l) => *l,
        LambdaChoice::Auto { grid, folds } => {
            let (pos, neg) = matrix.class_counts();
            let k = (*folds).min(pos).min(neg);
            if grid.is_empty() || k < 2 {
                config.lambda
            } else {
                let scores = lambda_cv_scores(&reduced, config, grid, k, seed)?;
                let mut best = 0;
                for (i, s) in scores.iter().enumerate() {
                    let better = *s > scores[best] || (*s == scores[best] && grid[i] > grid[best]);
                    if better {
                        best = i;
                    }
                }
                grid[best]
            }
        }
    };
    let mut result = l1_logistic_select(&reduced, &SelectionConfig { lambda: chosen, ..config.clone() })?;
    result.kept_columns = result.kept_columns.iter().map(|&c| filtered[c as usize]).collect();
    let mask = if !result.kept_columns.is_empty() {
        result.kept_columns.clone()
    } else if !filtered.is_empty() {
        filtered.clone()
    } else {
        (0..matrix.dimension() as u32).collect()
    };
    Ok(FeatureSelection { filtered, result, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Label;
    use crate::matrix::SparseVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column_matrix(ones: usize, n: usize) -> DesignMatrix {
        let rows = (0..n).map(|i| vec![u8::from(i < ones)]).collect::<Vec<_>>();
        let labels = (0..n).map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
        DesignMatrix::from_dense(&rows, labels).unwrap()
    }

    #[test]
    fn filter_examples() {
        assert!(near_constant_filter(&column_matrix(0, 100), 0.85).unwrap().is_empty());
        assert_eq!(near_constant_filter(&column_matrix(50, 100), 0.85).unwrap(), vec![0]);
        // 86 zeros: 0.86 ≥ 0.85
        assert!(near_constant_filter(&column_matrix(14, 100), 0.85).unwrap().is_empty());
        // 85 zeros sits exactly on the threshold and is removed
        assert!(near_constant_filter(&column_matrix(15, 100), 0.85).unwrap().is_empty());
        assert_eq!(near_constant_filter(&column_matrix(16, 100), 0.85).unwrap(), vec![0]);
        assert_eq!(near_constant_filter(&column_matrix(86, 100), 0.85).unwrap(), Vec::<u32>::new());
        let empty = DesignMatrix::new(1, vec![], vec![]).unwrap();
        assert_eq!(near_constant_filter(&empty, 0.85), Err(SelectionError::EmptyMatrix));
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize, density: f64) -> DesignMatrix {
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|_| (0..d).map(|_| u8::from(rng.gen_bool(density))).collect())
            .collect();
        let mut labels: Vec<Label> = (0..n)
            .map(|i| {
                let signal = rows[i].iter().take(2).map(|&v| v as usize).sum::<usize>();
                if rng.gen_bool(0.2 + 0.3 * signal as f64) { Label::Positive } else { Label::Negative }
            })
            .collect();
        labels[0] = Label::Positive;
        labels[1] = Label::Negative;
        DesignMatrix::from_dense(&rows, labels).unwrap()
    }

    /// Smooth-loss gradient by a dense recomputation.
    fn dense_gradient(m: &DesignMatrix, intercept: f64, w: &[f64]) -> (f64, Vec<f64>) {
        let n = m.n_rows() as f64;
        let mut g0 = 0.0;
        let mut g = vec![0.0; w.len()];
        for i in 0..m.n_rows() {
            let x = m.row(i).to_dense();
            let eta = intercept + x.iter().zip(w).filter(|(b, _)| **b).map(|(_, wj)| wj).sum::<f64>();
            let r = 1.0 / (1.0 + (-eta).exp()) - m.label(i).indicator();
            g0 += r;
            for (j, &b) in x.iter().enumerate() {
                if b {
                    g[j] += r;
                }
            }
        }
        (g0 / n, g.into_iter().map(|v| v / n).collect())
    }

    fn kkt_violation(m: &DesignMatrix, r: &SelectionResult) -> f64 {
        let w = r.full_weights(m.dimension());
        let (g0, g) = dense_gradient(m, r.intercept, &w);
        let mut worst = g0.abs();
        for (wj, gj) in w.iter().zip(&g) {
            let v = if *wj == 0.0 {
                (gj.abs() - r.lambda).max(0.0)
            } else {
                (gj + r.lambda * wj.signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn penalty_above_zero_point_zeroes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 40, 6, 0.4);
        let lmax = lambda_max(&m).unwrap();
        let r = l1_logistic_select(&m, &SelectionConfig { lambda: lmax * 1.0001, ..Default::default() }).unwrap();
        assert!(r.kept_columns.is_empty());
        assert!(r.converged);
        let r = l1_logistic_select(&m, &SelectionConfig { lambda: lmax * 0.5, ..Default::default() }).unwrap();
        assert!(!r.kept_columns.is_empty());
    }

    #[test]
    fn perfect_feature_kept_and_matches_brute_force() {
        // column 0 equals the label; column 1 is noise
        let rows = vec![vec![1, 0], vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0], vec![0, 1]];
        let labels = [1, 1, 1, 0, 0, 0].map(|v| if v == 1 { Label::Positive } else { Label::Negative });
        let m = DesignMatrix::from_dense(&rows, labels.to_vec()).unwrap();
        let lambda = 0.01;
        let r = l1_logistic_select(&m, &SelectionConfig { lambda, tolerance: 1e-10, ..Default::default() }).unwrap();
        assert!(r.kept_columns.contains(&0));
        let w = r.full_weights(2);
        assert!(w[0] > 0.0);

        // brute force over (w0, b) with w1 fixed at the solver's value (zero by symmetry)
        assert_eq!(w[1], 0.0);
        let objective = |w0: f64, b: f64| {
            let mut loss = 0.0;
            for i in 0..6 {
                let eta = b + if rows[i][0] == 1 { w0 } else { 0.0 };
                let y = labels[i].indicator();
                loss += (1.0 + eta.exp()).ln() - y * eta;
            }
            loss / 6.0 + lambda * w0.abs()
        };
        let (mut best, mut best_w0, mut best_b) = (f64::INFINITY, 0.0, 0.0);
        for a in 0..=1200 {
            let w0 = a as f64 * 0.01;
            for c in -600..=0 {
                let b = c as f64 * 0.01;
                let v = objective(w0, b);
                if v < best {
                    (best, best_w0, best_b) = (v, w0, b);
                }
            }
        }
        assert!((w[0] - best_w0).abs() < 0.02, "solver {} vs grid {best_w0}", w[0]);
        assert!((r.intercept - best_b).abs() < 0.02, "solver {} vs grid {best_b}", r.intercept);
        assert!(objective(w[0], r.intercept) <= best + 1e-9);
    }

    #[test]
    fn unpenalized_fit_has_zero_gradient() {
        let rows = vec![
            vec![1, 0, 1],
            vec![0, 1, 1],
            vec![1, 1, 0],
            vec![0, 0, 1],
            vec![1, 0, 0],
            vec![0, 1, 0],
            vec![1, 1, 1],
            vec![0, 0, 0],
            vec![1, 0, 1],
            vec![0, 1, 1],
        ];
        let labels = [1, 0, 1, 0, 0, 1, 0, 1, 0, 1].map(|v| if v == 1 { Label::Positive } else { Label::Negative });
        let m = DesignMatrix::from_dense(&rows, labels.to_vec()).unwrap();
        let r = l1_logistic_select(&m, &SelectionConfig { lambda: 0.0, tolerance: 1e-10, ..Default::default() })
            .unwrap();
        assert!(r.converged);
        // reference optimum from an independent quasi-Newton solve
        for (w, e) in r.full_weights(3).iter().zip([-0.84029118, 0.8402911, -1.95533847]) {
            assert!((w - e).abs() < 1e-5, "{w} vs {e}");
        }
        assert!((r.intercept - 1.18435817).abs() < 1e-5);
        let (g0, g) = dense_gradient(&m, r.intercept, &r.full_weights(3));
        let norm = (g0 * g0 + g.iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert!(norm <= 1e-7, "gradient norm {norm}");
    }

    #[test]
    fn single_class_rejected() {
        let m = DesignMatrix::from_dense(&[vec![1], vec![0]], vec![Label::Positive; 2]).unwrap();
        assert_eq!(l1_logistic_select(&m, &SelectionConfig::default()), Err(SelectionError::SingleClass));
        assert_eq!(lambda_max(&m), Err(SelectionError::SingleClass));
    }

    #[test]
    fn max_iterations_flags_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 60, 8, 0.4);
        let r = l1_logistic_select(&m, &SelectionConfig { lambda: 1e-4, max_iterations: 1, ..Default::default() })
            .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn decision_matches_dense_dot() {
        let r = SelectionResult {
            kept_columns: vec![1, 4],
            weights: vec![2.0, -0.5],
            intercept: 0.25,
            objective_trace: vec![],
            lambda: 0.0,
            iterations: 0,
            converged: true,
        };
        let x = SparseVector::new(6, vec![0, 1, 4, 5]).unwrap();
        assert_eq!(r.decision(&x), 1.75);
    }

    #[test]
    fn two_stage_selection_maps_columns_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // column 0 and 2 informative with mid frequency; 1 and 3 nearly constant
        let n = 120;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let pos = i % 3 == 0;
            let p = if pos { 0.8 } else { 0.1 };
            rows.push(vec![
                u8::from(rng.gen_bool(p)),
                u8::from(rng.gen_bool(0.02)),
                u8::from(rng.gen_bool(p)),
                0,
            ]);
            labels.push(if pos { Label::Positive } else { Label::Negative });
        }
        let m = DesignMatrix::from_dense(&rows, labels).unwrap();
        let sel = select_features(&m, &SelectionConfig::default(), &LambdaChoice::default(), 1).unwrap();
        assert_eq!(sel.filtered, vec![0, 2]);
        assert_eq!(sel.mask, vec![0, 2]);
        assert!(sel.result.weights.iter().all(|w| *w > 0.0));
        let again = select_features(&m, &SelectionConfig::default(), &LambdaChoice::default(), 1).unwrap();
        assert_eq!(sel, again);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn filter_is_monotone_in_threshold(seed in 0u64..1000, t1 in 0.55f64..1.0, dt in 0.0f64..0.45) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let density = rng.gen_range(0.05..0.5);
            let m = random_matrix(&mut rng, 30, 12, density);
            let t2 = (t1 + dt).min(1.0);
            let low = near_constant_filter(&m, t1).unwrap();
            let high = near_constant_filter(&m, t2).unwrap();
            prop_assert!(low.iter().all(|c| high.contains(c)));
        }

        #[test]
        fn optimality_and_monotone_trace(seed in 0u64..1000, lambda in prop::sample::select(vec![0.001, 0.01, 0.05])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, 50, 8, 0.35);
            let r = l1_logistic_select(&m, &SelectionConfig { lambda, ..Default::default() }).unwrap();
            prop_assert!(r.converged);
            prop_assert!(kkt_violation(&m, &r) <= 1e-4);
            for w in r.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            let again = l1_logistic_select(&m, &SelectionConfig { lambda, ..Default::default() }).unwrap();
            prop_assert_eq!(r, again);
        }
    }
}
