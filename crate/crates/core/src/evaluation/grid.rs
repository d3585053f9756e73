use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cv::{cross_validate, CvError, PreparedFolds};
use super::ConfusionCounts;
use crate::knn::Weighting;
use crate::model::{Algorithm, AlgorithmConfig};
use crate::svm::KernelKind;
use crate::tree::Criterion;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Cv(#[from] CvError),
}

/// A grid value as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            ParamValue::Text(_) => None,
        }
    }

    fn as_count(&self) -> Option<usize> {
        match *self {
            ParamValue::Int(i) if i >= 0 => Some(i as usize),
            _ => None,
        }
    }

    fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<ParamValue>,
}

impl Axis {
    fn new(name: &str, values: Vec<ParamValue>) -> Self {
        Axis { name: name.to_string(), values }
    }
}

/// Hyper-parameter axes of one algorithm. The first axis varies slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub axes: Vec<Axis>,
}

fn ints(v: &[i64]) -> Vec<ParamValue> {
    v.iter().map(|&i| ParamValue::Int(i)).collect()
}

fn floats(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&f| ParamValue::Float(f)).collect()
}

fn texts(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|s| ParamValue::Text(s.to_string())).collect()
}

impl ParamGrid {
    /// The reference search space for `algorithm`.
    pub fn default_for(algorithm: Algorithm) -> Self {
        let axes = match algorithm {
            Algorithm::Knn => vec![Axis::new("k", ints(&[1, 2, 3])), Axis::new("weighting", texts(&["uniform", "distance"]))],
            Algorithm::NaiveBayes => vec![],
            Algorithm::Svm => vec![
                Axis::new("c", floats(&[0.01, 0.1, 1.0, 10.0, 100.0])),
                Axis::new("kernel", texts(&["linear", "rbf"])),
                Axis::new("gamma", floats(&[1e-3, 1e-4])),
            ],
            Algorithm::DecisionTree => vec![Axis::new("criterion", texts(&["gini", "entropy"]))],
            Algorithm::RandomForest => vec![
                Axis::new("n_estimators", ints(&[10, 15, 100])),
                Axis::new("criterion", texts(&["gini", "entropy"])),
            ],
            Algorithm::AdaBoost => vec![Axis::new("n_estimators", ints(&[10, 15, 100]))],
        };
        ParamGrid { algorithm, axes }
    }

    pub fn defaults() -> Vec<ParamGrid> {
        Algorithm::ALL.into_iter().map(ParamGrid::default_for).collect()
    }

    /// A grid holding exactly one configuration.
    pub fn single(config: &AlgorithmConfig) -> Self {
        let axes = config
            .params()
            .into_iter()
            .map(|(name, value)| {
                let v = if let Ok(i) = value.parse::<i64>() {
                    ParamValue::Int(i)
                } else if let Ok(f) = value.parse::<f64>() {
                    ParamValue::Float(f)
                } else {
                    ParamValue::Text(value)
                };
                Axis::new(name, vec![v])
            })
            .collect();
        ParamGrid { algorithm: config.algorithm(), axes }
    }

    /// Product of axis lengths.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Every configuration, first axis slowest.
    pub fn configurations(&self) -> Result<Vec<AlgorithmConfig>, GridError> {
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(GridError::InvalidGrid(format!("{} axis '{}' is empty", self.algorithm, axis.name)));
            }
        }
        let mut out = vec![AlgorithmConfig::base(self.algorithm)];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(out.len() * axis.values.len());
            for cfg in &out {
                for v in &axis.values {
                    next.push(apply(cfg.clone(), &axis.name, v)?);
                }
            }
            out = next;
        }
        Ok(out)
    }
}

fn bad(name: &str, v: &ParamValue) -> GridError {
    GridError::InvalidGrid(format!("bad value {v:?} for '{name}'"))
}

fn apply(mut cfg: AlgorithmConfig, name: &str, v: &ParamValue) -> Result<AlgorithmConfig, GridError> {
    let f = || v.as_f64().ok_or_else(|| bad(name, v));
    let n = || v.as_count().ok_or_else(|| bad(name, v));
    let criterion = || match v.as_text() {
        Some("gini") => Ok(Criterion::Gini),
        Some("entropy") => Ok(Criterion::Entropy),
        _ => Err(bad(name, v)),
    };
    match (&mut cfg, name) {
        (AlgorithmConfig::Knn { k, .. }, "k") => *k = n()?,
        (AlgorithmConfig::Knn { weighting, .. }, "weighting") => {
            *weighting = match v.as_text() {
                Some("uniform") => Weighting::Uniform,
                Some("distance") => Weighting::Distance,
                _ => return Err(bad(name, v)),
            }
        }
        (AlgorithmConfig::NaiveBayes { alpha }, "alpha") => *alpha = f()?,
        (AlgorithmConfig::Svm { c, .. }, "c") => *c = f()?,
        (AlgorithmConfig::Svm { kernel, .. }, "kernel") => {
            *kernel = match v.as_text() {
                Some("linear") => KernelKind::Linear,
                Some("rbf") => KernelKind::Rbf,
                _ => return Err(bad(name, v)),
            }
        }
        (AlgorithmConfig::Svm { gamma, .. }, "gamma") => *gamma = f()?,
        (AlgorithmConfig::Svm { tolerance, .. }, "tolerance") => *tolerance = f()?,
        (AlgorithmConfig::Svm { max_passes, .. }, "max_passes") => *max_passes = n()?,
        (AlgorithmConfig::DecisionTree { criterion: c }, "criterion") => *c = criterion()?,
        (AlgorithmConfig::RandomForest { n_estimators, .. }, "n_estimators") => *n_estimators = n()?,
        (AlgorithmConfig::RandomForest { criterion: c, .. }, "criterion") => *c = criterion()?,
        (AlgorithmConfig::AdaBoost { n_estimators }, "n_estimators") => *n_estimators = n()?,
        (cfg, _) => {
            return Err(GridError::InvalidGrid(format!("{} has no parameter '{name}'", cfg.algorithm())));
        }
    }
    Ok(cfg)
}

/// Cross-validated score of one grid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub config: AlgorithmConfig,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    pub confusion: ConfusionCounts,
    pub converged: bool,
    /// Index of an earlier configuration that fits the identical model.
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: Algorithm,
    pub k: usize,
    pub seed: u64,
    /// Configurations enumerated, duplicates included.
    pub evaluated: usize,
    pub per_config: Vec<ConfigScore>,
    pub best_index: usize,
    pub best_config: AlgorithmConfig,
    pub best_mean_f1: f64,
    pub best_confusion: ConfusionCounts,
}

impl EvalReport {
    pub fn best(&self) -> &ConfigScore {
        &self.per_config[self.best_index]
    }

    /// Whether every fit reached its convergence criterion.
    pub fn converged(&self) -> bool {
        self.per_config.iter().all(|c| c.converged)
    }
}

/// Scores every configuration of `grid` on the same folds. The best is the
/// highest mean F1, ties to the earliest configuration.
pub fn grid_search(folds: &PreparedFolds, grid: &ParamGrid, seed: u64) -> Result<EvalReport, GridError> {
    let configs = grid.configurations()?;
    if configs.len() != grid.size() {
        return Err(GridError::InvalidGrid(format!("enumerated {} of {} configurations", configs.len(), grid.size())));
    }

    let canon: Vec<AlgorithmConfig> = configs.iter().map(AlgorithmConfig::canonical).collect();
    let first_of: Vec<usize> = (0..configs.len()).map(|i| canon.iter().position(|c| *c == canon[i]).unwrap()).collect();
    let unique: Vec<usize> = (0..configs.len()).filter(|&i| first_of[i] == i).collect();

    #[cfg(feature = "parallel")]
    let outcomes = {
        use rayon::prelude::*;
        unique.par_iter().map(|&i| cross_validate(folds, &configs[i], seed)).collect::<Vec<_>>()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes = unique.iter().map(|&i| cross_validate(folds, &configs[i], seed)).collect::<Vec<_>>();

    let mut scored = vec![None; configs.len()];
    for (&i, outcome) in unique.iter().zip(outcomes) {
        scored[i] = Some(outcome?);
    }
    let per_config: Vec<ConfigScore> = configs
        .into_iter()
        .enumerate()
        .map(|(i, config)| {
            let o = scored[first_of[i]].clone().expect("unique configuration scored");
            ConfigScore {
                config,
                fold_f1: o.fold_f1,
                mean_f1: o.mean_f1,
                confusion: o.confusion,
                converged: o.converged,
                duplicate_of: (first_of[i] != i).then_some(first_of[i]),
            }
        })
        .collect();

    let mut best_index = 0;
    for (i, s) in per_config.iter().enumerate() {
        if s.mean_f1 > per_config[best_index].mean_f1 {
            best_index = i;
        }
    }
    let best = &per_config[best_index];
    Ok(EvalReport {
        algorithm: grid.algorithm,
        k: folds.assignment.k,
        seed,
        evaluated: per_config.len(),
        best_config: best.config.clone(),
        best_mean_f1: best.mean_f1,
        best_confusion: best.confusion,
        best_index,
        per_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Label;
    use crate::evaluation::prepare_folds;
    use crate::matrix::DesignMatrix;

    #[test]
    fn reference_grid_sizes() {
        let sizes: Vec<usize> = ParamGrid::defaults().iter().map(|g| g.configurations().unwrap().len()).collect();
        assert_eq!(sizes, vec![6, 1, 20, 2, 6, 3]);
    }

    #[test]
    fn enumeration_order_first_axis_slowest() {
        let cfgs = ParamGrid::default_for(Algorithm::Knn).configurations().unwrap();
        let names: Vec<String> = cfgs.iter().map(|c| c.describe()).collect();
        assert_eq!(names[0], "k=1,weighting=uniform");
        assert_eq!(names[1], "k=1,weighting=distance");
        assert_eq!(names[5], "k=3,weighting=distance");
    }

    #[test]
    fn bad_grids_rejected() {
        let mut g = ParamGrid::default_for(Algorithm::Knn);
        g.axes[0].values.clear();
        assert!(g.configurations().is_err());
        let g = ParamGrid { algorithm: Algorithm::AdaBoost, axes: vec![Axis::new("k", ints(&[1]))] };
        assert!(g.configurations().is_err());
        let g = ParamGrid { algorithm: Algorithm::Knn, axes: vec![Axis::new("k", texts(&["x"]))] };
        assert!(g.configurations().is_err());
    }

    #[test]
    fn single_grid_round_trips_config() {
        for g in ParamGrid::defaults() {
            for c in g.configurations().unwrap() {
                assert_eq!(ParamGrid::single(&c).configurations().unwrap(), vec![c]);
            }
        }
    }

    #[test]
    fn toml_grid() {
        let text = r#"
            algorithm = "svm"
            axes = [{ name = "c", values = [1, 0.5] }, { name = "kernel", values = ["linear"] }]
        "#;
        let g: ParamGrid = toml::from_str(text).unwrap();
        assert_eq!(g.size(), 2);
        let cfgs = g.configurations().unwrap();
        assert!(matches!(cfgs[0], AlgorithmConfig::Svm { c, kernel: KernelKind::Linear, .. } if c == 1.0));
    }

    #[test]
    fn linear_duplicates_share_scores() {
        let rows: Vec<Vec<u8>> = (0..40).map(|i| vec![u8::from(i % 3 == 0), u8::from(i % 2 == 0), u8::from(i % 5 == 0)]).collect();
        let labels = (0..40).map(|i| if i % 3 == 0 { Label::Positive } else { Label::Negative }).collect();
        let m = DesignMatrix::from_dense(&rows, labels).unwrap();
        let folds = prepare_folds(&m, 4, 1, None).unwrap();
        let report = grid_search(&folds, &ParamGrid::default_for(Algorithm::Svm), 1).unwrap();
        assert_eq!(report.evaluated, 20);
        let dups = report.per_config.iter().filter(|c| c.duplicate_of.is_some()).count();
        assert_eq!(dups, 5);
        for c in &report.per_config {
            if let Some(j) = c.duplicate_of {
                assert_eq!(c.fold_f1, report.per_config[j].fold_f1);
            }
            assert_eq!(c.fold_f1.len(), 4);
        }
        let max = report.per_config.iter().map(|c| c.mean_f1).fold(f64::MIN, f64::max);
        assert_eq!(report.best_mean_f1, max);
        assert!(report.per_config[..report.best_index].iter().all(|c| c.mean_f1 < max));
    }
}
