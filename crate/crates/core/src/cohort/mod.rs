//! Patient records and cohorts: validation, the line-delimited record file
//! format, and a synthetic generator with planted class signal.

mod synth;

pub use synth::{default_signal_features, generate_synthetic_cohort, AgeDistribution, NoiseCounts, SignalFeature, SynthSpec};

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on a plausible age in years.
pub const MAX_AGE: u32 = 130;

/// Binary class label. `Negative` orders before `Positive`; every tie rule in
/// the crate resolves to `Negative`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// `+1.0` for positive, `-1.0` for negative.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    /// `1.0` for positive, `0.0` for negative.
    pub fn indicator(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => 0.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("positive"),
            Label::Negative => f.write_str("negative"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientRecord {
    pub patient_id: String,
    pub gender: String,
    pub race: String,
    pub ethnicity: String,
    pub age: u32,
    pub diagnoses: Vec<String>,
    pub medications: Vec<String>,
    pub problems: Vec<String>,
    pub surgical: Vec<String>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl PatientRecord {
    pub fn new(patient_id: impl Into<String>, age: u32) -> Self {
        PatientRecord {
            patient_id: patient_id.into(),
            gender: String::new(),
            race: String::new(),
            ethnicity: String::new(),
            age,
            diagnoses: Vec::new(),
            medications: Vec::new(),
            problems: Vec::new(),
            surgical: Vec::new(),
            notes: Vec::new(),
            label: None,
        }
    }

    fn set_fields(&self) -> [(&'static str, &Vec<String>); 4] {
        [
            ("diagnoses", &self.diagnoses),
            ("medications", &self.medications),
            ("problems", &self.problems),
            ("surgical", &self.surgical),
        ]
    }

    /// Trims and lowercases categorical and set-valued fields, sorting the sets.
    /// Duplicates are kept so that validation can still see them.
    pub fn canonicalize(&mut self) {
        for v in [&mut self.gender, &mut self.race, &mut self.ethnicity] {
            *v = canonical_name(v);
        }
        for set in [
            &mut self.diagnoses,
            &mut self.medications,
            &mut self.problems,
            &mut self.surgical,
        ] {
            for entry in set.iter_mut() {
                *entry = canonical_name(entry);
            }
            set.sort();
        }
    }

    /// Invariant violations of this record in isolation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.patient_id.trim().is_empty() {
            out.push("patient_id is empty".to_string());
        }
        if self.age > MAX_AGE {
            out.push(format!("age {} outside 0..={MAX_AGE}", self.age));
        }
        for (field, entries) in self.set_fields() {
            let mut seen = HashSet::new();
            for entry in entries {
                let key = canonical_name(entry);
                if !seen.insert(key.clone()) {
                    out.push(format!("duplicate entry {key:?} in {field}"));
                }
            }
        }
        out
    }
}

/// Trim, lowercase, and collapse internal whitespace runs to one space.
pub fn canonical_name(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Loaded,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cohort {
    pub records: Vec<PatientRecord>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub patient_id: String,
    pub record_index: usize,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {} ({}): {}", self.record_index, self.patient_id, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate patient_id {0:?}")]
    DuplicatePatientId(String),
    #[error("i/o failure: {0}")]
    IoFailure(String),
    #[error("invalid synthetic cohort spec: {0}")]
    InvalidSpec(String),
}

impl From<std::io::Error> for CohortError {
    fn from(e: std::io::Error) -> Self {
        CohortError::IoFailure(e.to_string())
    }
}

impl Cohort {
    pub fn new(records: Vec<PatientRecord>, provenance: Provenance) -> Self {
        Cohort { records, provenance }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records carrying each label, `(positive, negative)`.
    pub fn label_counts(&self) -> (usize, usize) {
        self.records.iter().fold((0, 0), |(p, n), r| match r.label {
            Some(Label::Positive) => (p + 1, n),
            Some(Label::Negative) => (p, n + 1),
            None => (p, n),
        })
    }

    /// Parses the line-delimited record format. Blank lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, CohortError> {
        let mut records = Vec::new();
        let mut ids = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut record: PatientRecord =
                serde_json::from_str(&line).map_err(|e| CohortError::MalformedRecord {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            if let Some(reason) = record.violations().into_iter().next() {
                return Err(CohortError::MalformedRecord { line: line_no, reason });
            }
            record.canonicalize();
            if !ids.insert(record.patient_id.clone()) {
                return Err(CohortError::DuplicatePatientId(record.patient_id));
            }
            records.push(record);
        }
        Ok(Cohort::new(records, Provenance::Loaded))
    }

    pub fn to_writer<W: Write>(&self, mut writer: W) -> Result<(), CohortError> {
        for record in &self.records {
            let line = serde_json::to_string(record)
                .map_err(|e| CohortError::IoFailure(e.to_string()))?;
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CohortError> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        self.to_writer(&mut writer)?;
        writer.flush()?;
        Ok(())
    }
}

pub fn load_cohort(path: impl AsRef<Path>) -> Result<Cohort, CohortError> {
    let file = std::fs::File::open(path)?;
    Cohort::from_reader(BufReader::new(file))
}

/// Lists every record and cohort invariant violation. An empty list means the
/// cohort is valid.
pub fn validate_cohort(cohort: &Cohort) -> Vec<Violation> {
    let mut report = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (i, record) in cohort.records.iter().enumerate() {
        for reason in record.violations() {
            report.push(Violation {
                patient_id: record.patient_id.clone(),
                record_index: i,
                reason,
            });
        }
        if !seen.insert(record.patient_id.as_str()) {
            report.push(Violation {
                patient_id: record.patient_id.clone(),
                record_index: i,
                reason: "patient_id not unique within cohort".to_string(),
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, age: u32) -> String {
        format!(
            r#"{{"patient_id":"{id}","gender":"female","race":"white","ethnicity":"not hispanic","age":{age},"diagnoses":["anemia","chest pain"],"medications":["loratadine 10mg"],"problems":[],"surgical":[],"notes":["Chest pain, BP 140."],"label":"positive"}}"#
        )
    }

    #[test]
    fn single_record_round_trips() {
        let text = format!("{}\n", line("p1", 43));
        let cohort = Cohort::from_reader(text.as_bytes()).unwrap();
        assert_eq!(cohort.len(), 1);
        let r = &cohort.records[0];
        assert_eq!(r.patient_id, "p1");
        assert_eq!(r.age, 43);
        assert_eq!(r.diagnoses, vec!["anemia", "chest pain"]);
        assert_eq!(r.notes, vec!["Chest pain, BP 140."]);
        assert_eq!(r.label, Some(Label::Positive));
        assert_eq!(cohort.to_jsonl(), text);
    }

    #[test]
    fn duplicate_patient_id_rejected() {
        let text = format!("{}\n{}\n", line("p1", 43), line("p1", 50));
        match Cohort::from_reader(text.as_bytes()) {
            Err(CohortError::DuplicatePatientId(id)) => assert_eq!(id, "p1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn age_out_of_bounds_rejected() {
        let text = line("p1", 200);
        match Cohort::from_reader(text.as_bytes()) {
            Err(CohortError::MalformedRecord { line, reason }) => {
                assert_eq!(line, 1);
                assert!(reason.contains("age"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = line("p1", 40).replace("\"age\"", "\"weight\":3,\"age\"");
        assert!(matches!(
            Cohort::from_reader(text.as_bytes()),
            Err(CohortError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn label_is_optional_and_strict() {
        let text = line("p1", 40).replace(r#","label":"positive""#, "");
        let c = Cohort::from_reader(text.as_bytes()).unwrap();
        assert_eq!(c.records[0].label, None);
        let bad = line("p1", 40).replace("\"positive\"", "\"maybe\"");
        assert!(Cohort::from_reader(bad.as_bytes()).is_err());
    }

    #[test]
    fn load_canonicalizes_sets() {
        let text = line("p1", 40).replace(r#"["anemia","chest pain"]"#, r#"["  Chest   Pain ","ANEMIA"]"#);
        let c = Cohort::from_reader(text.as_bytes()).unwrap();
        assert_eq!(c.records[0].diagnoses, vec!["anemia", "chest pain"]);
    }

    #[test]
    fn load_rejects_case_insensitive_duplicates() {
        let text = line("p1", 40).replace(r#"["anemia","chest pain"]"#, r#"["Anemia","anemia "]"#);
        assert!(matches!(
            Cohort::from_reader(text.as_bytes()),
            Err(CohortError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn validate_reports() {
        let mk = |id: &str| {
            let mut r = PatientRecord::new(id, 50);
            r.diagnoses = vec!["anemia".into()];
            r
        };
        let good = Cohort::new(vec![mk("a"), mk("b"), mk("c")], Provenance::Loaded);
        assert!(validate_cohort(&good).is_empty());

        let mut dup = mk("d");
        dup.diagnoses = vec!["Anemia".into(), "anemia".into()];
        let bad = Cohort::new(vec![mk("a"), dup], Provenance::Loaded);
        let report = validate_cohort(&bad);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].patient_id, "d");

        let empty = Cohort::new(vec![], Provenance::Loaded);
        assert!(validate_cohort(&empty).is_empty());

        let ids = Cohort::new(vec![mk("a"), mk("a")], Provenance::Loaded);
        assert_eq!(validate_cohort(&ids).len(), 1);
    }

    #[test]
    fn missing_file_is_io_failure() {
        assert!(matches!(
            load_cohort("/definitely/not/here.jsonl"),
            Err(CohortError::IoFailure(_))
        ));
    }
}
