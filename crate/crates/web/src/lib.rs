//! Browser bindings. Each export takes plain values and returns a JSON string
//! so the page needs no generated TypeScript glue beyond `JSON.parse`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use rarescreen::cohort::{default_signal_features, generate_synthetic_cohort, NoiseCounts, SynthSpec};
use rarescreen::evaluation::{ParamGrid, SelectionPlacement};
use rarescreen::model::Algorithm;
use rarescreen::pipeline::{evaluate, select_on_all, top_features, vectorize_cohort, PipelineConfig};
use rarescreen::tree::{impurity, Criterion};
use rarescreen::vectorizer::{extract_ngrams, preprocess_note, VectorizerConfig};

#[derive(Serialize)]
struct Failure {
    error: String,
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v),
        Err(error) => serde_json::to_string(&Failure { error }),
    }
    .unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
}

#[derive(Serialize)]
struct Tokens {
    tokens: Vec<String>,
    unigrams: Vec<(String, usize)>,
    bigrams: Vec<(String, usize)>,
}

/// Normalized tokens and n-gram counts of a free-text note.
#[wasm_bindgen]
pub fn tokenize_note(text: &str) -> String {
    to_json((|| {
        let tokens = preprocess_note(text, &VectorizerConfig::default());
        let count = |n| extract_ngrams(&tokens, n).map(|m| m.into_iter().collect()).map_err(|e| e.to_string());
        Ok(Tokens { unigrams: count(1)?, bigrams: count(2)?, tokens })
    })())
}

#[derive(Serialize)]
struct Ranked {
    feature: String,
    weight: f64,
}

#[derive(Serialize)]
struct CvResult {
    algorithm: String,
    config: String,
    n_features: usize,
    n_selected: Option<usize>,
    fold_f1: Vec<f64>,
    mean_f1: f64,
    top_features: Vec<Ranked>,
}

/// Generates a small synthetic cohort and cross-validates one algorithm's
/// default grid on it.
#[wasm_bindgen]
pub fn cross_validate_synthetic(
    positives: usize,
    negatives: usize,
    p_signal: f64,
    noise_features: usize,
    algorithm: &str,
    select: bool,
    seed: u64,
) -> String {
    to_json((|| {
        let algorithm: Algorithm = algorithm.parse()?;
        let quarter = noise_features / 4;
        let spec = SynthSpec {
            n_positive: positives,
            n_negative: negatives,
            signal_features: default_signal_features(p_signal, 0.05),
            n_noise_features_per_kind: NoiseCounts {
                diagnosis: quarter,
                medication: quarter,
                problem: quarter,
                surgical: noise_features - 3 * quarter,
            },
            notes: false,
            seed,
            ..SynthSpec::default()
        };
        let cohort = generate_synthetic_cohort(&spec).map_err(|e| e.to_string())?;
        let mut config = PipelineConfig {
            grids: vec![ParamGrid::default_for(algorithm)],
            cv_k: 5,
            seed,
            top_features: 10,
            ..PipelineConfig::default()
        };
        config.selection.enabled = select;
        config.selection.placement = SelectionPlacement::Global;
        let (space, matrix) = vectorize_cohort(&cohort, &config).map_err(|e| e.to_string())?;
        let report = evaluate(&matrix, &config).map_err(|e| e.to_string())?.remove(0);
        let selection = select_on_all(&matrix, &config).map_err(|e| e.to_string())?;
        let best = report.best();
        Ok(CvResult {
            algorithm: algorithm.title().to_string(),
            config: report.best_config.describe(),
            n_features: space.len(),
            n_selected: select.then_some(selection.mask.len()),
            fold_f1: best.fold_f1.clone(),
            mean_f1: best.mean_f1,
            top_features: top_features(&selection.result, &space, config.top_features)
                .into_iter()
                .map(|f| Ranked { feature: f.descriptor.to_string(), weight: f.weight })
                .collect(),
        })
    })())
}

#[derive(Serialize)]
struct Curve {
    p: Vec<f64>,
    gini: Vec<f64>,
    entropy: Vec<f64>,
}

/// Gini and entropy of a node with `n` rows as the positive count goes from
/// 0 to `n`.
#[wasm_bindgen]
pub fn impurity_curve(n: u32) -> String {
    to_json((|| {
        let n = n.max(1) as usize;
        let mut c = Curve { p: Vec::new(), gini: Vec::new(), entropy: Vec::new() };
        for pos in 0..=n {
            let counts = [n - pos, pos];
            c.p.push(pos as f64 / n as f64);
            c.gini.push(impurity(counts, Criterion::Gini).map_err(|e| e.to_string())?);
            c.entropy.push(impurity(counts, Criterion::Entropy).map_err(|e| e.to_string())?);
        }
        Ok(c)
    })())
}
