//! Soft-margin SVM trained in the dual with sequential minimal optimization.
//!
//! The solver minimizes ½ αᵀQα − Σα with Q_ij = y_i y_j K_ij subject to
//! 0 ≤ α ≤ C and Σ α_i y_i = 0. Each step picks the maximal violating pair
//! and solves the two-variable subproblem analytically; it stops when the
//! KKT gap m(α) − M(α) falls below the tolerance.

use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::matrix::{DesignMatrix, SparseVector};
use crate::model::ModelError;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 100;

/// Curvature floor for degenerate pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Only read by the RBF kernel.
    pub gamma: f64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec { kind: KernelKind::Linear, gamma: 1.0 }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelSpec { kind: KernelKind::Rbf, gamma }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.kind == KernelKind::Rbf && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ModelError::InvalidParameter("rbf gamma must be positive".into()));
        }
        Ok(())
    }

    /// Kernel value from the dot product and the squared distance.
    fn value_from_parts(&self, dot: usize, sq_dist: usize) -> f64 {
        match self.kind {
            KernelKind::Linear => dot as f64,
            KernelKind::Rbf => (-self.gamma * sq_dist as f64).exp(),
        }
    }
}

pub fn kernel_eval(x: &SparseVector, z: &SparseVector, spec: &KernelSpec) -> Result<f64, ModelError> {
    if x.dimension() != z.dimension() {
        return Err(ModelError::DimensionMismatch { expected: x.dimension(), found: z.dimension() });
    }
    let dot = x.dot(z);
    Ok(spec.value_from_parts(dot, x.count() + z.count() - 2 * dot))
}

/// Solution of the dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Final m(α) − M(α).
    pub kkt_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs SMO on a row-major `n × n` Gram matrix with labels `y` in {−1, +1}.
pub fn smo_solve(gram: &[f64], y: &[f64], c: f64, tolerance: f64, max_iterations: usize) -> DualSolution {
    let n = y.len();
    assert_eq!(gram.len(), n * n, "gram matrix must be n × n");
    let k = |i: usize, j: usize| gram[i * n + j];
    let q = |i: usize, j: usize| y[i] * y[j] * gram[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    let mut gap: f64;
    loop {
        // maximal violating pair
        let (mut i, mut g_max) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut g_min) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        gap = if i == usize::MAX || j == usize::MAX { 0.0 } else { g_max - g_min };
        if gap < tolerance {
            converged = true;
            break;
        }
        if iterations >= max_iterations {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (k(i, i) + k(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k(i, i) + k(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    // b from free vectors, else the midpoint of the feasible interval
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    DualSolution { alphas: alpha, bias: -rho, kkt_gap: gap, iterations, converged }
}

/// Dual objective Σα − ½ ΣΣ α_i α_j y_i y_j K_ij (to be maximized).
pub fn dual_objective(alphas: &[f64], y: &[f64], gram: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * gram[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Training rows with α > 0.
    pub support_rows: Vec<SparseVector>,
    /// ±1 label of each support row.
    pub support_labels: Vec<f64>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
    pub dimension: usize,
    pub kkt_residual: f64,
    pub tolerance: f64,
    pub converged: bool,
}

/// Gram matrix over the rows of `matrix`.
pub fn gram_matrix(matrix: &DesignMatrix, kernel: &KernelSpec) -> Vec<f64> {
    let n = matrix.n_rows();
    let rows = matrix.rows();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let dot = rows[i].dot(&rows[j]);
            let v = kernel.value_from_parts(dot, rows[i].count() + rows[j].count() - 2 * dot);
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// Fits an SVM. `max_passes` bounds the work at `max_passes · n` pair updates;
/// running out is reported through `converged`, not as an error.
pub fn smo_fit(
    matrix: &DesignMatrix,
    c: f64,
    kernel: KernelSpec,
    tolerance: f64,
    max_passes: usize,
) -> Result<SvmModel, ModelError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ModelError::InvalidParameter("C must be positive".into()));
    }
    if !(tolerance > 0.0) {
        return Err(ModelError::InvalidParameter("tolerance must be positive".into()));
    }
    kernel.validate()?;
    if !matrix.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    let y: Vec<f64> = matrix.labels().iter().map(|l| l.sign()).collect();
    let gram = gram_matrix(matrix, &kernel);
    let sol = smo_solve(&gram, &y, c, tolerance, max_passes.saturating_mul(matrix.n_rows()).max(1));
    let mut model = SvmModel {
        support_rows: Vec::new(),
        support_labels: Vec::new(),
        alphas: Vec::new(),
        bias: sol.bias,
        kernel,
        c,
        dimension: matrix.dimension(),
        kkt_residual: sol.kkt_gap,
        tolerance,
        converged: sol.converged,
    };
    for (i, &a) in sol.alphas.iter().enumerate() {
        if a > 0.0 {
            model.support_rows.push(matrix.row(i).clone());
            model.support_labels.push(y[i]);
            model.alphas.push(a);
        }
    }
    Ok(model)
}

impl SvmModel {
    /// Σ α_i y_i K(x_i, x) + b.
    pub fn margin(&self, x: &SparseVector) -> Result<f64, ModelError> {
        if x.dimension() != self.dimension {
            return Err(ModelError::DimensionMismatch { expected: self.dimension, found: x.dimension() });
        }
        let mut f = self.bias;
        for ((row, &yi), &a) in self.support_rows.iter().zip(&self.support_labels).zip(&self.alphas) {
            let dot = row.dot(x);
            f += a * yi * self.kernel.value_from_parts(dot, row.count() + x.count() - 2 * dot);
        }
        Ok(f)
    }

    pub fn decision(&self, x: &SparseVector) -> Result<(Label, f64), ModelError> {
        let m = self.margin(x)?;
        Ok((if m > 0.0 { Label::Positive } else { Label::Negative }, m))
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        Ok(self.decision(x)?.0)
    }
}

/// Evaluates `Σ α_i y_i K(x_i, x) + b` for real-valued support vectors.
pub fn dense_decision(support: &[Vec<f64>], y: &[f64], alphas: &[f64], bias: f64, kernel: &KernelSpec, x: &[f64]) -> f64 {
    let k = |a: &[f64], b: &[f64]| match kernel.kind {
        KernelKind::Linear => a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>(),
        KernelKind::Rbf => (-kernel.gamma * a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp(),
    };
    bias + support.iter().zip(y).zip(alphas).map(|((s, yi), a)| a * yi * k(s, x)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn kernel_examples() {
        let x = SparseVector::new(6, vec![0, 2, 4]).unwrap();
        assert_eq!(kernel_eval(&x, &x, &KernelSpec::rbf(0.5)).unwrap(), 1.0);
        let a = SparseVector::new(4, vec![0, 1]).unwrap();
        let b = SparseVector::new(4, vec![2, 3]).unwrap();
        assert_eq!(kernel_eval(&a, &b, &KernelSpec::linear()).unwrap(), 0.0);
        // symmetric difference of a and b has 4 elements
        let v = kernel_eval(&a, &b, &KernelSpec::rbf(0.001)).unwrap();
        assert!((v - (-0.004f64).exp()).abs() < 1e-15);
        assert!((v - 0.9960080).abs() < 1e-7);
        assert_eq!(kernel_eval(&a, &b, &KernelSpec::rbf(0.3)).unwrap(), kernel_eval(&b, &a, &KernelSpec::rbf(0.3)).unwrap());
        assert!(kernel_eval(&a, &SparseVector::zeros(3), &KernelSpec::linear()).is_err());
    }

    #[test]
    fn two_point_closed_form() {
        // x1 = (1,0) y=+1, x2 = (−1,0) y=−1 under the linear kernel
        let pts = [vec![1.0, 0.0], vec![-1.0, 0.0]];
        let y = [1.0, -1.0];
        let gram: Vec<f64> = pts.iter().flat_map(|a| pts.iter().map(move |b| a[0] * b[0] + a[1] * b[1])).collect();
        let sol = smo_solve(&gram, &y, 100.0, 1e-9, 1000);
        assert!(sol.converged);
        assert!((sol.alphas[0] - 0.5).abs() < 1e-6 && (sol.alphas[1] - 0.5).abs() < 1e-6);
        assert!(sol.bias.abs() < 1e-6);
        let f = |x: &[f64]| dense_decision(&pts, &y, &sol.alphas, sol.bias, &KernelSpec::linear(), x);
        assert!((f(&[2.0, 0.0]) - 2.0).abs() < 1e-6);
        assert!((f(&[1.0, 0.0]) - 1.0).abs() < 1e-6);
        assert!((f(&[0.3, 5.0]) - 0.3).abs() < 1e-6);
    }

    #[test]
    fn bias_only_model() {
        let model = SvmModel {
            support_rows: vec![SparseVector::zeros(2)],
            support_labels: vec![1.0],
            alphas: vec![0.0],
            bias: -0.3,
            kernel: KernelSpec::linear(),
            c: 1.0,
            dimension: 2,
            kkt_residual: 0.0,
            tolerance: 1e-3,
            converged: true,
        };
        let (label, m) = model.decision(&SparseVector::new(2, vec![1]).unwrap()).unwrap();
        assert_eq!(label, N);
        assert!((m + 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        let m = DesignMatrix::from_dense(&[vec![1], vec![0]], vec![P, P]).unwrap();
        assert_eq!(smo_fit(&m, 1.0, KernelSpec::linear(), 1e-3, 10), Err(ModelError::SingleClass));
        let m = DesignMatrix::from_dense(&[vec![1], vec![0]], vec![P, N]).unwrap();
        assert!(smo_fit(&m, 1.0, KernelSpec::rbf(0.0), 1e-3, 10).is_err());
    }

    #[test]
    fn separable_training_accuracy() {
        // feature 0 marks positives, others are shared noise
        let rows = vec![
            vec![1, 0, 1, 0],
            vec![1, 1, 0, 0],
            vec![1, 0, 0, 1],
            vec![1, 1, 1, 0],
            vec![0, 0, 1, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 0, 1],
            vec![0, 1, 1, 1],
            vec![0, 1, 1, 0],
        ];
        let labels = vec![P, P, P, P, N, N, N, N, N];
        let m = DesignMatrix::from_dense(&rows, labels).unwrap();
        let model = smo_fit(&m, 100.0, KernelSpec::linear(), 1e-6, 100).unwrap();
        assert!(model.converged);
        assert!(model.kkt_residual <= 1e-6);
        let s: f64 = model.alphas.iter().zip(&model.support_labels).map(|(a, y)| a * y).sum();
        assert!(s.abs() <= 1e-8);
        assert!(model.alphas.iter().all(|&a| (0.0..=100.0).contains(&a)));
        for i in 0..m.n_rows() {
            assert_eq!(model.predict(m.row(i)).unwrap(), m.label(i));
        }
    }

    #[test]
    fn pass_budget_flags_non_convergence() {
        let rows: Vec<Vec<u8>> = (0..20).map(|i| vec![(i % 2) as u8, (i % 3 == 0) as u8, (i % 5 == 0) as u8]).collect();
        let labels = (0..20).map(|i| if i % 4 == 0 { P } else { N }).collect();
        let m = DesignMatrix::from_dense(&rows, labels).unwrap();
        let model = smo_fit(&m, 10.0, KernelSpec::rbf(0.5), 1e-12, 0).unwrap();
        assert!(!model.converged);
    }
}
