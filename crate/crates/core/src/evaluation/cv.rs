use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{f1_score, stratified_kfold, ConfusionCounts, FoldAssignment, FoldError};
use crate::matrix::DesignMatrix;
use crate::model::{Learner, ModelError};
use crate::selection::{select_features, FeatureSelection, LambdaChoice, SelectionConfig, SelectionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CvError {
    #[error(transparent)]
    Folds(#[from] FoldError),
    #[error("feature selection failed{}: {source}", fold_suffix(*.fold))]
    Selection { fold: Option<usize>, source: SelectionError },
    #[error("fit failed on fold {fold}: {source}")]
    Fit { fold: usize, source: ModelError },
}

fn fold_suffix(fold: Option<usize>) -> String {
    fold.map(|f| format!(" on fold {f}")).unwrap_or_default()
}

/// Where feature selection is fit relative to the CV loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPlacement {
    /// On each fold's training rows only.
    #[default]
    PerFold,
    /// Once on all rows, before folds are formed.
    Global,
}

/// Train/test matrices of one fold, after any selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub train: DesignMatrix,
    pub test: DesignMatrix,
    /// Columns of the input matrix kept for this fold.
    pub mask: Vec<u32>,
}

/// Folds shared by every configuration of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFolds {
    pub assignment: FoldAssignment,
    pub folds: Vec<FoldData>,
    /// Selection fit on all rows under [`SelectionPlacement::Global`].
    pub global_selection: Option<FeatureSelection>,
}

/// Mixes the run seed with a fold index so each fold fit gets its own stream.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    let mut z = seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D1_049B_133E_11EB);
    z ^ (z >> 31)
}

/// Builds folds with no selection, or with selection placed per `placement`.
pub fn prepare_folds(
    matrix: &DesignMatrix,
    k: usize,
    seed: u64,
    selection: Option<(&SelectionConfig, &LambdaChoice, SelectionPlacement)>,
) -> Result<PreparedFolds, CvError> {
    match selection {
        None => prepare_folds_with(matrix, k, seed, |train, _| Ok((0..train.dimension() as u32).collect())),
        Some((config, lambda, SelectionPlacement::PerFold)) => prepare_folds_with(matrix, k, seed, |train, fold| {
            select_features(train, config, lambda, fold_seed(seed, fold))
                .map(|s| s.mask)
                .map_err(|source| CvError::Selection { fold: Some(fold), source })
        }),
        Some((config, lambda, SelectionPlacement::Global)) => {
            let global = select_features(matrix, config, lambda, seed)
                .map_err(|source| CvError::Selection { fold: None, source })?;
            let projected = matrix.project_columns(&global.mask);
            let mut prepared =
                prepare_folds_with(&projected, k, seed, |train, _| Ok((0..train.dimension() as u32).collect()))?;
            for f in &mut prepared.folds {
                f.mask = global.mask.clone();
            }
            prepared.global_selection = Some(global);
            Ok(prepared)
        }
    }
}

/// As [`prepare_folds`], with `selector` computing each fold's column mask.
/// The selector only ever receives that fold's training rows.
pub fn prepare_folds_with<F>(matrix: &DesignMatrix, k: usize, seed: u64, selector: F) -> Result<PreparedFolds, CvError>
where
    F: Fn(&DesignMatrix, usize) -> Result<Vec<u32>, CvError>,
{
    let assignment = stratified_kfold(matrix.labels(), k, seed)?;
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (train_idx, test_idx) = assignment.split(fold);
        let train = matrix.select_rows(&train_idx);
        let mask = selector(&train, fold)?;
        let test = matrix.select_rows(&test_idx).project_columns(&mask);
        folds.push(FoldData { train: train.project_columns(&mask), test, mask });
    }
    Ok(PreparedFolds { assignment, folds, global_selection: None })
}

/// Per-fold scores of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    /// Confusion counts pooled over the held-out folds.
    pub confusion: ConfusionCounts,
    pub converged: bool,
}

fn run_fold(learner: &dyn Learner, data: &FoldData, fold: usize, seed: u64) -> Result<(ConfusionCounts, bool), CvError> {
    let fit = learner
        .fit_predict(&data.train, &data.test, fold_seed(seed, fold))
        .map_err(|source| CvError::Fit { fold, source })?;
    Ok((ConfusionCounts::from_labels(data.test.labels(), &fit.predictions), fit.converged))
}

/// Fits on every fold's training rows and scores F1 on its held-out rows. The
/// mean is the unweighted mean of fold scores.
pub fn cross_validate(folds: &PreparedFolds, learner: &dyn Learner, seed: u64) -> Result<CvOutcome, CvError> {
    #[cfg(feature = "parallel")]
    let per_fold: Vec<Result<(ConfusionCounts, bool), CvError>> = {
        use rayon::prelude::*;
        folds.folds.par_iter().enumerate().map(|(i, d)| run_fold(learner, d, i, seed)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_fold: Vec<Result<(ConfusionCounts, bool), CvError>> =
        folds.folds.iter().enumerate().map(|(i, d)| run_fold(learner, d, i, seed)).collect();

    let mut outcome = CvOutcome { fold_f1: Vec::new(), mean_f1: 0.0, confusion: ConfusionCounts::default(), converged: true };
    for r in per_fold {
        let (counts, converged) = r?;
        outcome.fold_f1.push(f1_score(&counts));
        outcome.confusion += counts;
        outcome.converged &= converged;
    }
    outcome.mean_f1 = outcome.fold_f1.iter().sum::<f64>() / outcome.fold_f1.len() as f64;
    Ok(outcome)
}
