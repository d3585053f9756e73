//! The six classifier families behind one configuration type and one
//! fitted-model type.

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaboost::{fit_adaboost, AdaBoostModel};
use crate::cohort::Label;
use crate::forest::{fit_forest, ForestModel};
use crate::knn::{knn_fit, KnnModel, Weighting};
use crate::matrix::{DesignMatrix, SparseVector};
use crate::naive_bayes::{nb_fit, NbModel, DEFAULT_ALPHA};
use crate::svm::{smo_fit, KernelKind, KernelSpec, SvmModel, DEFAULT_MAX_PASSES, DEFAULT_TOLERANCE};
use crate::tree::{fit_tree, Criterion, TreeModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("training matrix has no rows")]
    EmptyMatrix,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("k = {k} exceeds the {rows} stored rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("no stump beats weighted error 0.5")]
    NoUsefulStump,
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("impurity of an empty node")]
    EmptyCounts,
}

/// Classifier families, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knn,
    NaiveBayes,
    Svm,
    DecisionTree,
    RandomForest,
    #[serde(rename = "adaboost")]
    AdaBoost,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Knn,
        Algorithm::NaiveBayes,
        Algorithm::Svm,
        Algorithm::DecisionTree,
        Algorithm::RandomForest,
        Algorithm::AdaBoost,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::NaiveBayes => "naive_bayes",
            Algorithm::Svm => "svm",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
            Algorithm::AdaBoost => "adaboost",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Algorithm::Knn => "K Nearest Neighbor",
            Algorithm::NaiveBayes => "Naive Bayes",
            Algorithm::Svm => "SVM",
            Algorithm::DecisionTree => "Decision Tree",
            Algorithm::RandomForest => "Random Forest",
            Algorithm::AdaBoost => "AdaBoost",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.key() == s)
            .ok_or_else(|| format!("unknown algorithm '{s}'"))
    }
}

/// One fully specified hyper-parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmConfig {
    Knn {
        k: usize,
        weighting: Weighting,
    },
    NaiveBayes {
        alpha: f64,
    },
    Svm {
        c: f64,
        kernel: KernelKind,
        gamma: f64,
        tolerance: f64,
        max_passes: usize,
    },
    DecisionTree {
        criterion: Criterion,
    },
    RandomForest {
        n_estimators: usize,
        criterion: Criterion,
    },
    #[serde(rename = "adaboost")]
    AdaBoost {
        n_estimators: usize,
    },
}

impl AlgorithmConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmConfig::Knn { .. } => Algorithm::Knn,
            AlgorithmConfig::NaiveBayes { .. } => Algorithm::NaiveBayes,
            AlgorithmConfig::Svm { .. } => Algorithm::Svm,
            AlgorithmConfig::DecisionTree { .. } => Algorithm::DecisionTree,
            AlgorithmConfig::RandomForest { .. } => Algorithm::RandomForest,
            AlgorithmConfig::AdaBoost { .. } => Algorithm::AdaBoost,
        }
    }

    /// Default configuration of an algorithm; grid axes override fields.
    pub fn base(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Knn => AlgorithmConfig::Knn { k: 1, weighting: Weighting::Uniform },
            Algorithm::NaiveBayes => AlgorithmConfig::NaiveBayes { alpha: DEFAULT_ALPHA },
            Algorithm::Svm => AlgorithmConfig::Svm {
                c: 1.0,
                kernel: KernelKind::Rbf,
                gamma: 1e-3,
                tolerance: DEFAULT_TOLERANCE,
                max_passes: DEFAULT_MAX_PASSES,
            },
            Algorithm::DecisionTree => AlgorithmConfig::DecisionTree { criterion: Criterion::Gini },
            Algorithm::RandomForest => AlgorithmConfig::RandomForest { n_estimators: 10, criterion: Criterion::Gini },
            Algorithm::AdaBoost => AlgorithmConfig::AdaBoost { n_estimators: 10 },
        }
    }

    /// The configuration with parameters that cannot affect the fit
    /// normalized away (gamma under a linear kernel).
    pub fn canonical(&self) -> AlgorithmConfig {
        match self {
            AlgorithmConfig::Svm { c, kernel: KernelKind::Linear, tolerance, max_passes, .. } => AlgorithmConfig::Svm {
                c: *c,
                kernel: KernelKind::Linear,
                gamma: 0.0,
                tolerance: *tolerance,
                max_passes: *max_passes,
            },
            other => other.clone(),
        }
    }

    /// `name=value` pairs of the searched parameters, for reports.
    pub fn params(&self) -> Vec<(&'static str, String)> {
        match self {
            AlgorithmConfig::Knn { k, weighting } => vec![("k", k.to_string()), ("weighting", weighting.to_string())],
            AlgorithmConfig::NaiveBayes { alpha } => vec![("alpha", alpha.to_string())],
            AlgorithmConfig::Svm { c, kernel, gamma, .. } => {
                vec![("c", c.to_string()), ("kernel", kernel.to_string()), ("gamma", gamma.to_string())]
            }
            AlgorithmConfig::DecisionTree { criterion } => vec![("criterion", criterion.to_string())],
            AlgorithmConfig::RandomForest { n_estimators, criterion } => {
                vec![("n_estimators", n_estimators.to_string()), ("criterion", criterion.to_string())]
            }
            AlgorithmConfig::AdaBoost { n_estimators } => vec![("n_estimators", n_estimators.to_string())],
        }
    }

    pub fn describe(&self) -> String {
        self.params().iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
    }

    pub fn fit(&self, matrix: &DesignMatrix, seed: u64) -> Result<TrainedModel, ModelError> {
        Ok(match *self {
            AlgorithmConfig::Knn { k, weighting } => TrainedModel::Knn(knn_fit(matrix, k, weighting)?),
            AlgorithmConfig::NaiveBayes { alpha } => TrainedModel::NaiveBayes(nb_fit(matrix, alpha)?),
            AlgorithmConfig::Svm { c, kernel, gamma, tolerance, max_passes } => {
                let spec = KernelSpec { kind: kernel, gamma: if kernel == KernelKind::Linear { 1.0 } else { gamma } };
                TrainedModel::Svm(smo_fit(matrix, c, spec, tolerance, max_passes)?)
            }
            AlgorithmConfig::DecisionTree { criterion } => {
                if matrix.is_empty() {
                    return Err(ModelError::EmptyMatrix);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                TrainedModel::DecisionTree(fit_tree(matrix, criterion, None, &mut rng)?)
            }
            AlgorithmConfig::RandomForest { n_estimators, criterion } => {
                TrainedModel::RandomForest(fit_forest(matrix, n_estimators, criterion, seed)?)
            }
            AlgorithmConfig::AdaBoost { n_estimators } => TrainedModel::AdaBoost(fit_adaboost(matrix, n_estimators)?),
        })
    }
}

impl fmt::Display for AlgorithmConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.algorithm(), self.describe())
    }
}

/// A fitted classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Knn(KnnModel),
    NaiveBayes(NbModel),
    Svm(SvmModel),
    DecisionTree(TreeModel),
    RandomForest(ForestModel),
    #[serde(rename = "adaboost")]
    AdaBoost(AdaBoostModel),
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Knn(_) => Algorithm::Knn,
            TrainedModel::NaiveBayes(_) => Algorithm::NaiveBayes,
            TrainedModel::Svm(_) => Algorithm::Svm,
            TrainedModel::DecisionTree(_) => Algorithm::DecisionTree,
            TrainedModel::RandomForest(_) => Algorithm::RandomForest,
            TrainedModel::AdaBoost(_) => Algorithm::AdaBoost,
        }
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        match self {
            TrainedModel::Knn(m) => m.predict(x),
            TrainedModel::NaiveBayes(m) => m.predict(x),
            TrainedModel::Svm(m) => m.predict(x),
            TrainedModel::DecisionTree(m) => m.predict(x),
            TrainedModel::RandomForest(m) => m.predict(x),
            TrainedModel::AdaBoost(m) => m.predict(x),
        }
    }

    pub fn predict_all(&self, rows: &[SparseVector]) -> Result<Vec<Label>, ModelError> {
        rows.iter().map(|x| self.predict(x)).collect()
    }

    /// False only for an SVM whose solver hit its pass budget.
    pub fn converged(&self) -> bool {
        match self {
            TrainedModel::Svm(m) => m.converged,
            _ => true,
        }
    }
}

/// Labels predicted for one held-out fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldFit {
    pub predictions: Vec<Label>,
    pub converged: bool,
}

/// Anything cross-validation can train and score.
pub trait Learner: Sync {
    fn fit_predict(&self, train: &DesignMatrix, test: &DesignMatrix, seed: u64) -> Result<FoldFit, ModelError>;
}

impl Learner for AlgorithmConfig {
    fn fit_predict(&self, train: &DesignMatrix, test: &DesignMatrix, seed: u64) -> Result<FoldFit, ModelError> {
        let model = self.fit(train, seed)?;
        Ok(FoldFit { predictions: model.predict_all(test.rows())?, converged: model.converged() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    fn toy() -> DesignMatrix {
        DesignMatrix::from_dense(
            &[vec![1, 0, 1], vec![1, 1, 0], vec![1, 0, 0], vec![0, 1, 1], vec![0, 0, 1], vec![0, 1, 0]],
            vec![P, P, P, N, N, N],
        )
        .unwrap()
    }

    #[test]
    fn every_family_fits_and_predicts() {
        let m = toy();
        for algorithm in Algorithm::ALL {
            let model = AlgorithmConfig::base(algorithm).fit(&m, 3).unwrap();
            assert_eq!(model.algorithm(), algorithm);
            let preds = model.predict_all(m.rows()).unwrap();
            assert_eq!(preds.len(), 6);
            assert!(model.predict(&SparseVector::zeros(4)).is_err());
        }
    }

    #[test]
    fn config_serde_round_trip() {
        for algorithm in Algorithm::ALL {
            let c = AlgorithmConfig::base(algorithm);
            let text = serde_json::to_string(&c).unwrap();
            assert!(text.contains(&format!("\"algorithm\":\"{}\"", algorithm.key())));
            assert_eq!(serde_json::from_str::<AlgorithmConfig>(&text).unwrap(), c);
            assert_eq!(algorithm.key().parse::<Algorithm>().unwrap(), algorithm);
        }
    }

    #[test]
    fn linear_gamma_is_not_canonical() {
        let a = AlgorithmConfig::Svm { c: 1.0, kernel: KernelKind::Linear, gamma: 1e-3, tolerance: 1e-3, max_passes: 100 };
        let b = AlgorithmConfig::Svm { c: 1.0, kernel: KernelKind::Linear, gamma: 1e-4, tolerance: 1e-3, max_passes: 100 };
        assert_eq!(a.canonical(), b.canonical());
        let r1 = AlgorithmConfig::Svm { c: 1.0, kernel: KernelKind::Rbf, gamma: 1e-3, tolerance: 1e-3, max_passes: 100 };
        let r2 = AlgorithmConfig::Svm { c: 1.0, kernel: KernelKind::Rbf, gamma: 1e-4, tolerance: 1e-3, max_passes: 100 };
        assert_ne!(r1.canonical(), r2.canonical());
    }
}
