//! Turns patient records into binary feature vectors.
//!
//! Structured fields map to one indicator per distinct value, age maps to a
//! fixed-width bin, and progress notes map to pruned unigram/bigram presence
//! indicators. Column order is fixed by [`FeatureKind`] order and then by name,
//! so a space built from the same cohort in any record order is identical.

mod text;

pub use text::{default_stopwords, extract_ngrams, preprocess_note, DEFAULT_STOPWORDS};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{canonical_name, Cohort, PatientRecord, MAX_AGE};
use crate::matrix::{DesignMatrix, SparseVector};

pub const MANIFEST_HEADER: &str = "# rarescreen feature-space v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Demographic,
    Diagnosis,
    Medication,
    Problem,
    Surgical,
    Unigram,
    Bigram,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Demographic,
        FeatureKind::Diagnosis,
        FeatureKind::Medication,
        FeatureKind::Problem,
        FeatureKind::Surgical,
        FeatureKind::Unigram,
        FeatureKind::Bigram,
    ];

    /// Kinds backed by a coded list on the record.
    pub fn is_record_list(self) -> bool {
        matches!(
            self,
            FeatureKind::Diagnosis | FeatureKind::Medication | FeatureKind::Problem | FeatureKind::Surgical
        )
    }

    pub fn is_note(self) -> bool {
        matches!(self, FeatureKind::Unigram | FeatureKind::Bigram)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Demographic => "demographic",
            FeatureKind::Diagnosis => "diagnosis",
            FeatureKind::Medication => "medication",
            FeatureKind::Problem => "problem",
            FeatureKind::Surgical => "surgical",
            FeatureKind::Unigram => "unigram",
            FeatureKind::Bigram => "bigram",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = VectorizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| VectorizeError::Manifest(format!("unknown feature kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub kind: FeatureKind,
    pub name: String,
}

impl FeatureDescriptor {
    pub fn new(kind: FeatureKind, name: impl Into<String>) -> Self {
        FeatureDescriptor { kind, name: name.into() }
    }

    /// The age-bin lower bound, for `demographic` descriptors of the form
    /// `age:L-U`.
    pub fn age_bin_lower(&self) -> Option<u32> {
        if self.kind != FeatureKind::Demographic {
            return None;
        }
        let range = self.name.strip_prefix("age:")?;
        range.split_once('-')?.0.parse().ok()
    }
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizerConfig {
    pub age_bin_width: u32,
    pub stopwords: BTreeSet<String>,
    pub numeric_placeholder: String,
    pub max_doc_frequency: f64,
    pub min_doc_count: usize,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            age_bin_width: 10,
            stopwords: default_stopwords(),
            numeric_placeholder: "<num>".to_string(),
            max_doc_frequency: 0.9,
            min_doc_count: 2,
        }
    }
}

impl VectorizerConfig {
    pub fn validate(&self) -> Result<(), VectorizeError> {
        if self.age_bin_width < 1 {
            return Err(VectorizeError::InvalidConfig("age_bin_width must be at least 1".into()));
        }
        if !(self.max_doc_frequency > 0.0 && self.max_doc_frequency <= 1.0) {
            return Err(VectorizeError::InvalidConfig("max_doc_frequency must lie in (0, 1]".into()));
        }
        if self.min_doc_count < 1 {
            return Err(VectorizeError::InvalidConfig("min_doc_count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorizeError {
    #[error("age {0} outside 0..=130")]
    OutOfRange(u32),
    #[error("age bin width must be at least 1")]
    InvalidBinWidth,
    #[error("n-gram order {0} unsupported (expected 1 or 2)")]
    UnsupportedN(usize),
    #[error("cannot build a feature space from an empty cohort")]
    EmptyCohort,
    #[error("record {0:?} has no label")]
    Unlabeled(String),
    #[error("invalid vectorizer config: {0}")]
    InvalidConfig(String),
    #[error("bad feature manifest: {0}")]
    Manifest(String),
}

/// Maps an age to its `"L-U"` bin of the given width.
pub fn discretize_age(age: u32, bin_width: u32) -> Result<String, VectorizeError> {
    if age > MAX_AGE {
        return Err(VectorizeError::OutOfRange(age));
    }
    if bin_width == 0 {
        return Err(VectorizeError::InvalidBinWidth);
    }
    let lower = bin_width * (age / bin_width);
    Ok(format!("{}-{}", lower, lower + bin_width - 1))
}

/// Ordered registry of features; column id = position in `descriptors`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    descriptors: Vec<FeatureDescriptor>,
    index: BTreeMap<FeatureDescriptor, u32>,
    config: VectorizerConfig,
    kinds: BTreeSet<FeatureKind>,
}

impl FeatureSpace {
    fn from_descriptors(
        descriptors: Vec<FeatureDescriptor>,
        config: VectorizerConfig,
        kinds: BTreeSet<FeatureKind>,
    ) -> Self {
        let index = descriptors
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as u32))
            .collect();
        FeatureSpace { descriptors, index, config, kinds }
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn descriptor(&self, column: u32) -> &FeatureDescriptor {
        &self.descriptors[column as usize]
    }

    pub fn column_of(&self, descriptor: &FeatureDescriptor) -> Option<u32> {
        self.index.get(descriptor).copied()
    }

    pub fn config(&self) -> &VectorizerConfig {
        &self.config
    }

    pub fn kinds(&self) -> &BTreeSet<FeatureKind> {
        &self.kinds
    }

    /// Number of descriptors of each kind.
    pub fn kind_counts(&self) -> BTreeMap<FeatureKind, usize> {
        let mut out = BTreeMap::new();
        for d in &self.descriptors {
            *out.entry(d.kind).or_insert(0) += 1;
        }
        out
    }

    /// Header line followed by one `kind<TAB>name` line per column.
    pub fn to_manifest(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for d in &self.descriptors {
            out.push_str(d.kind.as_str());
            out.push('\t');
            out.push_str(&d.name);
            out.push('\n');
        }
        out
    }

    pub fn from_manifest(
        manifest: &str,
        config: VectorizerConfig,
        kinds: BTreeSet<FeatureKind>,
    ) -> Result<Self, VectorizeError> {
        let mut lines = manifest.lines();
        match lines.next() {
            Some(MANIFEST_HEADER) => {}
            other => {
                return Err(VectorizeError::Manifest(format!("unexpected header {other:?}")));
            }
        }
        let mut descriptors = Vec::new();
        for (i, line) in lines.enumerate() {
            let (kind, name) = line
                .split_once('\t')
                .ok_or_else(|| VectorizeError::Manifest(format!("column {i}: missing tab")))?;
            descriptors.push(FeatureDescriptor::new(kind.parse()?, name));
        }
        if descriptors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VectorizeError::Manifest("descriptors not in canonical order".into()));
        }
        Ok(Self::from_descriptors(descriptors, config, kinds))
    }
}

fn structured_features(
    record: &PatientRecord,
    config: &VectorizerConfig,
    kinds: &BTreeSet<FeatureKind>,
    out: &mut BTreeSet<FeatureDescriptor>,
) {
    if kinds.contains(&FeatureKind::Demographic) {
        for (field, value) in [
            ("gender", &record.gender),
            ("race", &record.race),
            ("ethnicity", &record.ethnicity),
        ] {
            let value = canonical_name(value);
            if !value.is_empty() {
                out.insert(FeatureDescriptor::new(FeatureKind::Demographic, format!("{field}:{value}")));
            }
        }
        if let Ok(bin) = discretize_age(record.age, config.age_bin_width) {
            out.insert(FeatureDescriptor::new(FeatureKind::Demographic, format!("age:{bin}")));
        }
    }
    for (kind, entries) in [
        (FeatureKind::Diagnosis, &record.diagnoses),
        (FeatureKind::Medication, &record.medications),
        (FeatureKind::Problem, &record.problems),
        (FeatureKind::Surgical, &record.surgical),
    ] {
        if kinds.contains(&kind) {
            for entry in entries {
                let name = canonical_name(entry);
                if !name.is_empty() {
                    out.insert(FeatureDescriptor::new(kind, name));
                }
            }
        }
    }
}

/// Distinct n-grams of a record's notes. Bigrams never span two notes.
fn note_features(
    record: &PatientRecord,
    config: &VectorizerConfig,
    kinds: &BTreeSet<FeatureKind>,
    out: &mut BTreeSet<FeatureDescriptor>,
) {
    let want_uni = kinds.contains(&FeatureKind::Unigram);
    let want_bi = kinds.contains(&FeatureKind::Bigram);
    if !want_uni && !want_bi {
        return;
    }
    for note in &record.notes {
        let tokens = preprocess_note(note, config);
        for (n, kind, wanted) in [(1, FeatureKind::Unigram, want_uni), (2, FeatureKind::Bigram, want_bi)] {
            if wanted {
                let grams = extract_ngrams(&tokens, n).expect("n is 1 or 2");
                out.extend(grams.into_keys().map(|g| FeatureDescriptor::new(kind, g)));
            }
        }
    }
}

/// Builds a feature space over all seven feature kinds.
pub fn build_feature_space(cohort: &Cohort, config: &VectorizerConfig) -> Result<FeatureSpace, VectorizeError> {
    build_feature_space_for(cohort, config, &FeatureKind::ALL.into_iter().collect())
}

/// Builds a feature space restricted to `kinds`. Note n-grams are kept when
/// their document count is at least `min_doc_count` and their document
/// frequency is at most `max_doc_frequency`; a document is one patient.
pub fn build_feature_space_for(
    cohort: &Cohort,
    config: &VectorizerConfig,
    kinds: &BTreeSet<FeatureKind>,
) -> Result<FeatureSpace, VectorizeError> {
    config.validate()?;
    if cohort.is_empty() {
        return Err(VectorizeError::EmptyCohort);
    }
    let mut structured = BTreeSet::new();
    let mut doc_counts: BTreeMap<FeatureDescriptor, usize> = BTreeMap::new();
    for record in &cohort.records {
        structured_features(record, config, kinds, &mut structured);
        let mut grams = BTreeSet::new();
        note_features(record, config, kinds, &mut grams);
        for g in grams {
            *doc_counts.entry(g).or_insert(0) += 1;
        }
    }
    let max_docs = config.max_doc_frequency * cohort.len() as f64;
    structured.extend(
        doc_counts
            .into_iter()
            .filter(|(_, count)| *count >= config.min_doc_count && *count as f64 <= max_docs)
            .map(|(g, _)| g),
    );
    Ok(FeatureSpace::from_descriptors(
        structured.into_iter().collect(),
        config.clone(),
        kinds.clone(),
    ))
}

/// Every feature descriptor of `kinds` the record exhibits, with no
/// vocabulary pruning.
pub fn record_features(
    record: &PatientRecord,
    config: &VectorizerConfig,
    kinds: &BTreeSet<FeatureKind>,
) -> BTreeSet<FeatureDescriptor> {
    let mut features = BTreeSet::new();
    structured_features(record, config, kinds, &mut features);
    note_features(record, config, kinds, &mut features);
    features
}

/// Binary vector of the record's features that exist in `space`; anything
/// outside the space is dropped.
pub fn vectorize_record(record: &PatientRecord, space: &FeatureSpace) -> SparseVector {
    let features = record_features(record, &space.config, &space.kinds);
    let active = features.iter().filter_map(|d| space.column_of(d)).collect();
    SparseVector::from_unsorted(space.len(), active).expect("columns come from the space")
}

/// Vectorizes every record; all records must be labeled.
pub fn design_matrix(cohort: &Cohort, space: &FeatureSpace) -> Result<DesignMatrix, VectorizeError> {
    let mut rows = Vec::with_capacity(cohort.len());
    let mut labels = Vec::with_capacity(cohort.len());
    for record in &cohort.records {
        let label = record
            .label
            .ok_or_else(|| VectorizeError::Unlabeled(record.patient_id.clone()))?;
        rows.push(vectorize_record(record, space));
        labels.push(label);
    }
    Ok(DesignMatrix::new(space.len(), rows, labels).expect("rows share the space dimension"))
}
