use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PipelineConfig;
use crate::cohort::{Label, PatientRecord};
use crate::matrix::SparseVector;
use crate::model::{ModelError, TrainedModel};
use crate::vectorizer::{vectorize_record, FeatureKind, FeatureSpace, VectorizerConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArtifactError {
    #[error("artifact format version {found} does not match supported version {expected}")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("corrupt artifact: {0}")]
    CorruptArtifact(String),
    #[error("i/o failure: {0}")]
    IoFailure(String),
}

/// Everything needed to score new records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub feature_manifest: String,
    pub vectorizer: VectorizerConfig,
    pub feature_kinds: BTreeSet<FeatureKind>,
    /// Columns of the feature space the model was trained on; `None` is all.
    pub mask: Option<Vec<u32>>,
    pub model: TrainedModel,
    pub config: PipelineConfig,
}

impl ModelArtifact {
    pub fn new(space: &FeatureSpace, mask: Option<Vec<u32>>, model: TrainedModel, config: PipelineConfig) -> Self {
        ModelArtifact {
            format_version: FORMAT_VERSION,
            feature_manifest: space.to_manifest(),
            vectorizer: space.config().clone(),
            feature_kinds: space.kinds().clone(),
            mask,
            model,
            config,
        }
    }

    pub fn feature_space(&self) -> Result<FeatureSpace, ArtifactError> {
        FeatureSpace::from_manifest(&self.feature_manifest, self.vectorizer.clone(), self.feature_kinds.clone())
            .map_err(|e| ArtifactError::CorruptArtifact(e.to_string()))
    }

    /// Predicts a vector over the full feature space.
    pub fn predict_vector(&self, x: &SparseVector) -> Result<Label, ModelError> {
        match &self.mask {
            Some(mask) => self.model.predict(&x.project(mask)),
            None => self.model.predict(x),
        }
    }

    pub fn predict_records(&self, records: &[PatientRecord]) -> Result<Vec<Label>, ArtifactError> {
        let space = self.feature_space()?;
        records
            .iter()
            .map(|r| self.predict_vector(&vectorize_record(r, &space)))
            .collect::<Result<_, _>>()
            .map_err(|e| ArtifactError::CorruptArtifact(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ArtifactError::CorruptArtifact(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| ArtifactError::CorruptArtifact("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(ArtifactError::VersionMismatch { found, expected: FORMAT_VERSION });
        }
        let artifact: ModelArtifact =
            serde_json::from_value(value).map_err(|e| ArtifactError::CorruptArtifact(e.to_string()))?;
        artifact.feature_space()?;
        Ok(artifact)
    }
}

pub fn save_artifact(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<(), ArtifactError> {
    std::fs::write(path.as_ref(), artifact.to_json()).map_err(|e| ArtifactError::IoFailure(e.to_string()))
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<ModelArtifact, ArtifactError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| ArtifactError::IoFailure(e.to_string()))?;
    ModelArtifact::from_json(&text)
}
