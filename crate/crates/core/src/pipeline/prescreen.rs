use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RankedFeature;
use crate::cohort::{Cohort, PatientRecord};
use crate::vectorizer::{record_features, FeatureDescriptor, FeatureKind, VectorizerConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrescreenError {
    #[error("target recall must lie in (0, 1]")]
    InvalidTarget,
    #[error("record {0} has no label")]
    Unlabeled(String),
    #[error("cohort has no positive records")]
    NoPositives,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "atom", rename_all = "snake_case")]
pub enum Atom {
    Present { feature: FeatureDescriptor },
    AgeAtLeast { years: u32 },
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Present { feature } => write!(f, "has {feature}"),
            Atom::AgeAtLeast { years } => write!(f, "age >= {years}"),
        }
    }
}

/// A disjunction of atoms; a record passes if any atom holds. The empty rule
/// set passes everyone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescreenRuleSet {
    pub rules: Vec<Atom>,
    pub target_recall: f64,
    pub measured_recall: f64,
    /// Share of the cohort the rules exclude.
    pub filter_fraction: f64,
    /// False when every atom was used and recall still fell short.
    pub reached_target: bool,
    pub vectorizer: VectorizerConfig,
}

fn atom_holds(atom: &Atom, record: &PatientRecord, features: &BTreeSet<FeatureDescriptor>) -> bool {
    match atom {
        Atom::Present { feature } => features.contains(feature),
        Atom::AgeAtLeast { years } => record.age >= *years,
    }
}

fn kinds_of(rules: &[Atom]) -> BTreeSet<FeatureKind> {
    rules
        .iter()
        .filter_map(|a| match a {
            Atom::Present { feature } => Some(feature.kind),
            Atom::AgeAtLeast { .. } => None,
        })
        .collect()
}

impl PrescreenRuleSet {
    pub fn passes(&self, record: &PatientRecord) -> bool {
        if self.rules.is_empty() {
            return true;
        }
        let features = record_features(record, &self.vectorizer, &kinds_of(&self.rules));
        self.rules.iter().any(|a| atom_holds(a, record, &features))
    }

    /// Records that pass, in cohort order.
    pub fn apply<'a>(&self, cohort: &'a Cohort) -> Vec<&'a PatientRecord> {
        cohort.records.iter().filter(|r| self.passes(r)).collect()
    }
}

/// Atom for a ranked feature: age bins become lower age bounds, everything
/// else a presence test.
fn atom_for(descriptor: &FeatureDescriptor) -> Atom {
    match descriptor.age_bin_lower() {
        Some(years) => Atom::AgeAtLeast { years },
        None => Atom::Present { feature: descriptor.clone() },
    }
}

/// Walks `top` in rank order, adding each positively weighted atom that
/// covers a positive record not yet covered, until recall on the labeled
/// positives reaches `target_recall`.
pub fn derive_prescreen_rules(
    cohort: &Cohort,
    top: &[RankedFeature],
    target_recall: f64,
    vectorizer: &VectorizerConfig,
) -> Result<PrescreenRuleSet, PrescreenError> {
    if !(target_recall > 0.0 && target_recall <= 1.0) {
        return Err(PrescreenError::InvalidTarget);
    }
    let mut positive = Vec::with_capacity(cohort.len());
    for r in &cohort.records {
        positive.push(r.label.ok_or_else(|| PrescreenError::Unlabeled(r.patient_id.clone()))?.is_positive());
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(PrescreenError::NoPositives);
    }

    let kinds: BTreeSet<FeatureKind> = top.iter().map(|f| f.descriptor.kind).collect();
    let features: Vec<BTreeSet<FeatureDescriptor>> =
        cohort.records.iter().map(|r| record_features(r, vectorizer, &kinds)).collect();
    let mut covered = vec![false; cohort.len()];
    let mut rules: Vec<Atom> = Vec::new();
    let recall = |covered: &[bool]| (0..covered.len()).filter(|&i| positive[i] && covered[i]).count() as f64 / n_pos as f64;

    if !top.is_empty() {
        for f in top {
            if recall(&covered) >= target_recall {
                break;
            }
            if f.weight <= 0.0 {
                continue;
            }
            let atom = atom_for(&f.descriptor);
            if rules.contains(&atom) {
                continue;
            }
            let hits: Vec<bool> =
                cohort.records.iter().zip(&features).map(|(r, fs)| atom_holds(&atom, r, fs)).collect();
            if !(0..hits.len()).any(|i| hits[i] && positive[i] && !covered[i]) {
                continue;
            }
            for (c, h) in covered.iter_mut().zip(hits) {
                *c |= h;
            }
            rules.push(atom);
        }
    }
    if rules.is_empty() {
        covered = vec![true; cohort.len()];
    }
    let measured_recall = recall(&covered);
    let excluded = covered.iter().filter(|&&c| !c).count();
    Ok(PrescreenRuleSet {
        rules,
        target_recall,
        measured_recall,
        filter_fraction: excluded as f64 / cohort.len().max(1) as f64,
        reached_target: measured_recall >= target_recall,
        vectorizer: vectorizer.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Label, Provenance};

    fn rec(id: &str, age: u32, dx: &[&str], label: Label) -> PatientRecord {
        let mut r = PatientRecord::new(id, age);
        r.diagnoses = dx.iter().map(|s| s.to_string()).collect();
        r.label = Some(label);
        r
    }

    fn ranked(kind: FeatureKind, name: &str, weight: f64) -> RankedFeature {
        RankedFeature { column: 0, descriptor: FeatureDescriptor::new(kind, name), weight }
    }

    fn cohort() -> Cohort {
        Cohort::new(
            vec![
                rec("p1", 81, &["chest pain", "cardiac arrest"], Label::Positive),
                rec("p2", 72, &["chest pain"], Label::Positive),
                rec("n1", 40, &["cardiac arrest"], Label::Negative),
                rec("n2", 35, &[], Label::Negative),
                rec("n3", 30, &["flu"], Label::Negative),
            ],
            Provenance::Loaded,
        )
    }

    #[test]
    fn single_covering_atom() {
        let top = vec![ranked(FeatureKind::Diagnosis, "chest pain", 1.5), ranked(FeatureKind::Diagnosis, "cardiac arrest", 1.0)];
        let rules = derive_prescreen_rules(&cohort(), &top, 1.0, &VectorizerConfig::default()).unwrap();
        assert_eq!(rules.rules.len(), 1);
        assert_eq!(rules.measured_recall, 1.0);
        assert!(rules.reached_target);
        assert!((rules.filter_fraction - 0.6).abs() < 1e-12);
        let c = cohort();
        let kept = rules.apply(&c);
        assert!(c.records.iter().filter(|r| r.label == Some(Label::Positive)).all(|r| kept.iter().any(|k| k.patient_id == r.patient_id)));
    }

    #[test]
    fn empty_list_matches_everyone() {
        let rules = derive_prescreen_rules(&cohort(), &[], 1.0, &VectorizerConfig::default()).unwrap();
        assert!(rules.rules.is_empty());
        assert_eq!(rules.measured_recall, 1.0);
        assert_eq!(rules.filter_fraction, 0.0);
        assert!(rules.passes(&cohort().records[3]));
    }

    #[test]
    fn unreachable_recall_is_flagged() {
        let top = vec![ranked(FeatureKind::Diagnosis, "cardiac arrest", 2.0), ranked(FeatureKind::Diagnosis, "flu", 1.0)];
        let rules = derive_prescreen_rules(&cohort(), &top, 1.0, &VectorizerConfig::default()).unwrap();
        assert!(!rules.reached_target);
        assert_eq!(rules.measured_recall, 0.5);
        assert_eq!(rules.rules.len(), 1);
    }

    #[test]
    fn age_bins_become_thresholds_and_negative_weights_are_skipped() {
        let top = vec![
            ranked(FeatureKind::Demographic, "gender:male", -3.0),
            ranked(FeatureKind::Demographic, "age:70-79", 1.0),
        ];
        let rules = derive_prescreen_rules(&cohort(), &top, 1.0, &VectorizerConfig::default()).unwrap();
        assert_eq!(rules.rules, vec![Atom::AgeAtLeast { years: 70 }]);
        assert_eq!(rules.measured_recall, 1.0);
        assert_eq!(rules.rules[0].to_string(), "age >= 70");
    }

    #[test]
    fn invalid_target() {
        assert_eq!(derive_prescreen_rules(&cohort(), &[], 0.0, &VectorizerConfig::default()), Err(PrescreenError::InvalidTarget));
    }
}
