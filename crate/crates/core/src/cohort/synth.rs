use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{canonical_name, Cohort, CohortError, Label, PatientRecord, Provenance, MAX_AGE};
use crate::vectorizer::FeatureKind;

/// A planted feature whose presence depends on the class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFeature {
    pub kind: FeatureKind,
    pub name: String,
    pub p_given_positive: f64,
    pub p_given_negative: f64,
}

impl SignalFeature {
    pub fn new(kind: FeatureKind, name: &str, p_pos: f64, p_neg: f64) -> Self {
        SignalFeature {
            kind,
            name: name.to_string(),
            p_given_positive: p_pos,
            p_given_negative: p_neg,
        }
    }
}

/// Decade-bin weights per class. Entry `i` weights ages `10i..=10i+9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeDistribution {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl Default for AgeDistribution {
    fn default() -> Self {
        AgeDistribution {
            positive: vec![0.0, 0.0, 0.0, 0.0, 0.02, 0.05, 0.13, 0.30, 0.35, 0.15],
            negative: vec![0.0, 0.0, 0.02, 0.05, 0.10, 0.18, 0.25, 0.22, 0.13, 0.05],
        }
    }
}

/// Number of label-independent noise features generated for each coded list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseCounts {
    pub diagnosis: usize,
    pub medication: usize,
    pub problem: usize,
    pub surgical: usize,
}

impl NoiseCounts {
    pub fn total(&self) -> usize {
        self.diagnosis + self.medication + self.problem + self.surgical
    }
}

impl Default for NoiseCounts {
    fn default() -> Self {
        NoiseCounts { diagnosis: 800, medication: 600, problem: 450, surgical: 150 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_positive: usize,
    pub n_negative: usize,
    pub signal_features: Vec<SignalFeature>,
    pub n_noise_features_per_kind: NoiseCounts,
    pub noise_presence_rate: f64,
    pub age_distribution: AgeDistribution,
    /// Emit short free-text progress notes mentioning the patient's codes.
    pub notes: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_positive: 73,
            n_negative: 197,
            signal_features: default_signal_features(0.6, 0.05),
            n_noise_features_per_kind: NoiseCounts::default(),
            noise_presence_rate: 0.03,
            age_distribution: AgeDistribution::default(),
            notes: true,
            seed: 20_160_101,
        }
    }
}

/// Ten planted diagnosis and medication features, all with the same presence rates.
pub fn default_signal_features(p_pos: f64, p_neg: f64) -> Vec<SignalFeature> {
    use FeatureKind::{Diagnosis, Medication};
    [
        (Diagnosis, "cardiac arrest"),
        (Diagnosis, "chest pain"),
        (Diagnosis, "congestive heart failure"),
        (Diagnosis, "hypertension"),
        (Diagnosis, "prim open angle glaucoma"),
        (Diagnosis, "shoulder arthritis"),
        (Medication, "doxercalciferol"),
        (Medication, "loratadine 10mg"),
        (Medication, "levothyroxine sodium 25mcg"),
        (Medication, "sodium chloride 0.9%"),
    ]
    .into_iter()
    .map(|(kind, name)| SignalFeature::new(kind, name, p_pos, p_neg))
    .collect()
}

const GENDERS: [&str; 2] = ["female", "male"];
const RACES: [&str; 4] = ["white", "black or african american", "asian", "other"];
const ETHNICITIES: [&str; 2] = ["not hispanic or latino", "hispanic or latino"];
const NOTE_FILLER: [&str; 8] = [
    "patient reports fatigue",
    "follow up in clinic",
    "no acute distress",
    "reviewed labs with patient",
    "denies fever",
    "ambulating without assistance",
    "continue current plan",
    "shortness of breath on exertion",
];

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CohortError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        for f in &self.signal_features {
            if !unit(f.p_given_positive) || !unit(f.p_given_negative) {
                return Err(CohortError::InvalidSpec(format!(
                    "signal feature {:?} has a probability outside [0,1]",
                    f.name
                )));
            }
            if !f.kind.is_record_list() {
                return Err(CohortError::InvalidSpec(format!(
                    "signal feature {:?} must be a diagnosis, medication, problem or surgical entry",
                    f.name
                )));
            }
            if canonical_name(&f.name).is_empty() {
                return Err(CohortError::InvalidSpec("signal feature with empty name".into()));
            }
        }
        if !unit(self.noise_presence_rate) {
            return Err(CohortError::InvalidSpec("noise_presence_rate outside [0,1]".into()));
        }
        for (class, weights) in [
            ("positive", &self.age_distribution.positive),
            ("negative", &self.age_distribution.negative),
        ] {
            if weights.is_empty() || weights.len() * 10 > MAX_AGE as usize + 1 {
                return Err(CohortError::InvalidSpec(format!(
                    "{class} age weights must cover 1..=13 decades"
                )));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(CohortError::InvalidSpec(format!("{class} age weight is negative")));
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(CohortError::InvalidSpec(format!(
                    "{class} age weights sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Builds a labeled cohort from `spec`. The result is a pure function of the
/// spec, seed included.
pub fn generate_synthetic_cohort(spec: &SynthSpec) -> Result<Cohort, CohortError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Positive, spec.n_positive)
        .chain(std::iter::repeat_n(Label::Negative, spec.n_negative))
        .collect();
    labels.shuffle(&mut rng);

    let pos_ages = WeightedIndex::new(&spec.age_distribution.positive)
        .map_err(|e| CohortError::InvalidSpec(e.to_string()))?;
    let neg_ages = WeightedIndex::new(&spec.age_distribution.negative)
        .map_err(|e| CohortError::InvalidSpec(e.to_string()))?;

    let noise = &spec.n_noise_features_per_kind;
    let noise_kinds = [
        (FeatureKind::Diagnosis, "dx", noise.diagnosis),
        (FeatureKind::Medication, "med", noise.medication),
        (FeatureKind::Problem, "prob", noise.problem),
        (FeatureKind::Surgical, "surg", noise.surgical),
    ];

    let width = labels.len().max(1).to_string().len().max(4);
    let mut records = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        let mut record = PatientRecord::new(format!("pt-{:0width$}", i + 1), 0);
        record.label = Some(label);
        record.gender = GENDERS.choose(&mut rng).unwrap().to_string();
        record.race = RACES.choose(&mut rng).unwrap().to_string();
        record.ethnicity = ETHNICITIES.choose(&mut rng).unwrap().to_string();
        let decade = match label {
            Label::Positive => pos_ages.sample(&mut rng),
            Label::Negative => neg_ages.sample(&mut rng),
        } as u32;
        record.age = (decade * 10 + rng.gen_range(0..10)).min(MAX_AGE);

        for feature in &spec.signal_features {
            let p = match label {
                Label::Positive => feature.p_given_positive,
                Label::Negative => feature.p_given_negative,
            };
            if rng.gen_bool(p) {
                record_list(&mut record, feature.kind).push(canonical_name(&feature.name));
            }
        }
        for &(kind, prefix, count) in &noise_kinds {
            for j in 0..count {
                if rng.gen_bool(spec.noise_presence_rate) {
                    record_list(&mut record, kind).push(format!("{prefix}-noise-{:04}", j + 1));
                }
            }
        }
        for list in [
            &mut record.diagnoses,
            &mut record.medications,
            &mut record.problems,
            &mut record.surgical,
        ] {
            list.sort();
            list.dedup();
        }
        if spec.notes {
            record.notes = synth_notes(&record, &mut rng);
        }
        records.push(record);
    }
    Ok(Cohort::new(records, Provenance::Synthetic))
}

fn record_list(record: &mut PatientRecord, kind: FeatureKind) -> &mut Vec<String> {
    match kind {
        FeatureKind::Diagnosis => &mut record.diagnoses,
        FeatureKind::Medication => &mut record.medications,
        FeatureKind::Problem => &mut record.problems,
        FeatureKind::Surgical => &mut record.surgical,
        other => unreachable!("{other:?} is not a record list"),
    }
}

fn synth_notes(record: &PatientRecord, rng: &mut ChaCha8Rng) -> Vec<String> {
    let n_notes = rng.gen_range(1..=3);
    (0..n_notes)
        .map(|_| {
            let mut parts = Vec::new();
            let opener = NOTE_FILLER.choose(rng).unwrap();
            parts.push(format!("{}{}.", opener[..1].to_uppercase(), &opener[1..]));
            if let Some(dx) = record.diagnoses.choose(rng) {
                parts.push(format!("Seen today for {dx}."));
            }
            parts.push(format!(
                "BP {}/{}, HR {}.",
                rng.gen_range(100..170),
                rng.gen_range(60..100),
                rng.gen_range(55..110)
            ));
            if let Some(med) = record.medications.choose(rng) {
                parts.push(format!("Continue {med}."));
            }
            parts.join(" ")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_matches_reference_class_sizes() {
        let cohort = generate_synthetic_cohort(&SynthSpec::default()).unwrap();
        assert_eq!(cohort.label_counts(), (73, 197));
        assert_eq!(cohort.len(), 270);
        assert_eq!(cohort.provenance, Provenance::Synthetic);
        assert!(super::super::validate_cohort(&cohort).is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec { n_positive: 20, n_negative: 30, ..Default::default() };
        let a = generate_synthetic_cohort(&spec).unwrap().to_jsonl();
        let b = generate_synthetic_cohort(&spec).unwrap().to_jsonl();
        assert_eq!(a, b);
        let other = generate_synthetic_cohort(&SynthSpec { seed: spec.seed + 1, ..spec })
            .unwrap()
            .to_jsonl();
        assert_ne!(a, other);
    }

    #[test]
    fn synthetic_cohort_survives_file_round_trip() {
        let spec = SynthSpec { n_positive: 5, n_negative: 5, ..Default::default() };
        let cohort = generate_synthetic_cohort(&spec).unwrap();
        let text = cohort.to_jsonl();
        let loaded = Cohort::from_reader(text.as_bytes()).unwrap();
        assert_eq!(loaded.records, cohort.records);
        assert_eq!(loaded.to_jsonl(), text);
    }

    #[test]
    fn rejects_bad_probabilities_and_weights() {
        let mut spec = SynthSpec::default();
        spec.signal_features[0].p_given_positive = 1.5;
        assert!(matches!(generate_synthetic_cohort(&spec), Err(CohortError::InvalidSpec(_))));

        let mut spec = SynthSpec::default();
        spec.age_distribution.negative[5] += 0.2;
        assert!(matches!(generate_synthetic_cohort(&spec), Err(CohortError::InvalidSpec(_))));

        let spec = SynthSpec { noise_presence_rate: -0.1, ..Default::default() };
        assert!(generate_synthetic_cohort(&spec).is_err());

        let mut spec = SynthSpec::default();
        spec.signal_features[0].kind = FeatureKind::Bigram;
        assert!(generate_synthetic_cohort(&spec).is_err());
    }

    /// Exact two-sided 99% binomial acceptance interval, computed by summing
    /// the pmf in log space.
    fn binomial_interval(n: u64, p: f64, level: f64) -> (u64, u64) {
        let ln_fact: Vec<f64> = std::iter::once(0.0)
            .chain((1..=n).scan(0.0, |acc, k| {
                *acc += (k as f64).ln();
                Some(*acc)
            }))
            .collect();
        let pmf = |k: u64| {
            (ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize]
                + k as f64 * p.ln()
                + (n - k) as f64 * (1.0 - p).ln())
            .exp()
        };
        let tail = (1.0 - level) / 2.0;
        let mut cdf = 0.0;
        let mut lo = 0;
        for k in 0..=n {
            cdf += pmf(k);
            if cdf >= tail {
                lo = k;
                break;
            }
        }
        let mut upper_tail = 0.0;
        let mut hi = n;
        for k in (0..=n).rev() {
            upper_tail += pmf(k);
            if upper_tail >= tail {
                hi = k;
                break;
            }
        }
        (lo, hi)
    }

    #[test]
    fn signal_frequency_within_binomial_interval() {
        let (lo, hi) = binomial_interval(1000, 0.6, 0.99);
        // normal approximation: 600 ± 2.576·sqrt(240) ≈ 600 ± 40
        assert!((555..=565).contains(&lo) && (635..=645).contains(&hi), "{lo}..{hi}");

        let spec = SynthSpec {
            n_positive: 1000,
            n_negative: 0,
            signal_features: vec![SignalFeature::new(FeatureKind::Diagnosis, "marker condition", 0.6, 0.0)],
            n_noise_features_per_kind: NoiseCounts { diagnosis: 0, medication: 0, problem: 0, surgical: 0 },
            notes: false,
            ..Default::default()
        };
        let cohort = generate_synthetic_cohort(&spec).unwrap();
        let hits = cohort
            .records
            .iter()
            .filter(|r| r.diagnoses.iter().any(|d| d == "marker condition"))
            .count() as u64;
        assert!((lo..=hi).contains(&hits), "{hits} outside [{lo}, {hi}]");
    }
}
