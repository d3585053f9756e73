//! End-to-end run: vectorize, optionally select, grid-search every enabled
//! algorithm, refit the overall best on all rows, rank features, and derive
//! prescreen rules.

mod artifact;
mod prescreen;
mod report;

pub use artifact::{load_artifact, save_artifact, ArtifactError, ModelArtifact, FORMAT_VERSION};
pub use prescreen::{derive_prescreen_rules, Atom, PrescreenError, PrescreenRuleSet};
pub use report::{
    eval_summary_text, eval_table_tsv, prescreen_text, top_features_text, top_features_tsv, ReportBundle,
};

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{Cohort, CohortError};
use crate::evaluation::{grid_search, prepare_folds, CvError, EvalReport, GridError, ParamGrid, SelectionPlacement};
use crate::matrix::DesignMatrix;
use crate::model::{Algorithm, ModelError, TrainedModel};
use crate::selection::{select_features, FeatureSelection, LambdaChoice, SelectionConfig, SelectionError, SelectionResult};
use crate::vectorizer::{
    build_feature_space_for, design_matrix, FeatureDescriptor, FeatureKind, FeatureSpace, VectorizeError, VectorizerConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    /// Whether classifiers see only the selected columns.
    pub enabled: bool,
    pub placement: SelectionPlacement,
    pub lambda: LambdaChoice,
    pub solver: SelectionConfig,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        SelectionSettings {
            enabled: false,
            placement: SelectionPlacement::PerFold,
            lambda: LambdaChoice::default(),
            solver: SelectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub vectorizer: VectorizerConfig,
    pub selection: SelectionSettings,
    /// One grid per algorithm to evaluate, in reporting order.
    pub grids: Vec<ParamGrid>,
    pub cv_k: usize,
    pub seed: u64,
    pub enabled_feature_kinds: BTreeSet<FeatureKind>,
    /// Worker threads; 0 uses the default pool.
    pub threads: usize,
    pub top_features: usize,
    pub prescreen_target_recall: f64,
}

pub const DEFAULT_SEED: u64 = 20160101;

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            vectorizer: VectorizerConfig::default(),
            selection: SelectionSettings::default(),
            grids: ParamGrid::defaults(),
            cv_k: 10,
            seed: DEFAULT_SEED,
            enabled_feature_kinds: FeatureKind::ALL.into_iter().filter(|k| !k.is_note()).collect(),
            threads: 0,
            top_features: 20,
            prescreen_target_recall: 1.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.cv_k < 2 {
            return bad("cv_k must be at least 2");
        }
        if self.enabled_feature_kinds.is_empty() {
            return bad("at least one feature kind must be enabled");
        }
        if self.grids.is_empty() {
            return bad("at least one grid is required");
        }
        let mut seen = BTreeSet::new();
        for g in &self.grids {
            if !seen.insert(g.algorithm) {
                return Err(PipelineError::Config(format!("duplicate grid for {}", g.algorithm)));
            }
        }
        if !(self.prescreen_target_recall > 0.0 && self.prescreen_target_recall <= 1.0) {
            return bad("prescreen_target_recall must lie in (0, 1]");
        }
        self.vectorizer.validate()?;
        self.selection.solver.validate().map_err(|e| PipelineError::Selection { stage: "config", source: e })?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The grid for `algorithm`, if it is enabled.
    pub fn grid(&self, algorithm: Algorithm) -> Option<&ParamGrid> {
        self.grids.iter().find(|g| g.algorithm == algorithm)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("cohort: {0}")]
    Cohort(#[from] CohortError),
    #[error("vectorize: {0}")]
    Vectorize(#[from] VectorizeError),
    #[error("select ({stage}): {source}")]
    Selection { stage: &'static str, source: SelectionError },
    #[error("cross-validation: {0}")]
    Cv(#[from] CvError),
    #[error("grid search for {algorithm}: {source}")]
    Grid { algorithm: Algorithm, source: GridError },
    #[error("final fit: {0}")]
    Fit(#[from] ModelError),
    #[error("artifact: {0}")]
    Artifact(#[from] ArtifactError),
}

/// A kept column with its L1 weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub column: u32,
    pub descriptor: FeatureDescriptor,
    pub weight: f64,
}

/// Kept columns by descending |weight|, ties by column id.
pub fn top_features(selection: &SelectionResult, space: &FeatureSpace, limit: usize) -> Vec<RankedFeature> {
    let mut ranked: Vec<RankedFeature> = selection
        .kept_columns
        .iter()
        .zip(&selection.weights)
        .map(|(&column, &weight)| RankedFeature { column, descriptor: space.descriptor(column).clone(), weight })
        .collect();
    ranked.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.column.cmp(&b.column)));
    ranked.truncate(limit);
    ranked
}

/// Feature space and design matrix for a labeled cohort.
pub fn vectorize_cohort(cohort: &Cohort, config: &PipelineConfig) -> Result<(FeatureSpace, DesignMatrix), PipelineError> {
    let space = build_feature_space_for(cohort, &config.vectorizer, &config.enabled_feature_kinds)?;
    let matrix = design_matrix(cohort, &space)?;
    Ok((space, matrix))
}

/// Filter plus L1 selection on every row, as used for the feature ranking and
/// the final model.
pub fn select_on_all(matrix: &DesignMatrix, config: &PipelineConfig) -> Result<FeatureSelection, PipelineError> {
    select_features(matrix, &config.selection.solver, &config.selection.lambda, config.seed)
        .map_err(|source| PipelineError::Selection { stage: "all rows", source })
}

/// Cross-validated grid search of every enabled algorithm on `matrix`.
pub fn evaluate(matrix: &DesignMatrix, config: &PipelineConfig) -> Result<Vec<EvalReport>, PipelineError> {
    let s = &config.selection;
    let selection = s.enabled.then_some((&s.solver, &s.lambda, s.placement));
    let folds = prepare_folds(matrix, config.cv_k, config.seed, selection)?;
    let mut grids: Vec<&ParamGrid> = config.grids.iter().collect();
    grids.sort_by_key(|g| g.algorithm);
    grids
        .into_iter()
        .map(|g| grid_search(&folds, g, config.seed).map_err(|source| PipelineError::Grid { algorithm: g.algorithm, source }))
        .collect()
}

/// Index of the highest best-mean-F1 report, ties to the earlier algorithm.
pub fn overall_best(reports: &[EvalReport]) -> usize {
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.best_mean_f1 > reports[best].best_mean_f1 {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub space: FeatureSpace,
    pub matrix: DesignMatrix,
    /// One report per enabled algorithm, in reporting order.
    pub reports: Vec<EvalReport>,
    pub best_report: usize,
    /// Selection on all rows, the source of the feature ranking.
    pub selection: FeatureSelection,
    pub top_features: Vec<RankedFeature>,
    pub prescreen: PrescreenRuleSet,
    pub artifact: ModelArtifact,
}

impl PipelineOutput {
    /// False if any SVM fit stopped on its pass budget.
    pub fn converged(&self) -> bool {
        self.reports.iter().all(EvalReport::converged) && self.artifact.model.converged()
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

pub fn run_pipeline(cohort: &Cohort, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    with_threads(config.threads, || run_inner(cohort, config))
}

fn run_inner(cohort: &Cohort, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let (space, matrix) = vectorize_cohort(cohort, config)?;
    let reports = evaluate(&matrix, config)?;
    let best_report = overall_best(&reports);
    let selection = select_on_all(&matrix, config)?;
    let top = top_features(&selection.result, &space, config.top_features);
    let prescreen = derive_prescreen_rules(cohort, &top, config.prescreen_target_recall, &config.vectorizer)
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let mask = config.selection.enabled.then(|| selection.mask.clone());
    let train = match &mask {
        Some(m) => matrix.project_columns(m),
        None => matrix.clone(),
    };
    let model: TrainedModel = reports[best_report].best_config.fit(&train, config.seed)?;
    let artifact = ModelArtifact::new(&space, mask, model, config.clone());
    Ok(PipelineOutput { space, matrix, reports, best_report, selection, top_features: top, prescreen, artifact })
}
