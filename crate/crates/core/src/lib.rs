//! Rare-disease patient screening from sparse binary EHR features.

pub mod adaboost;
pub mod cohort;
pub mod evaluation;
pub mod forest;
pub mod knn;
pub mod matrix;
pub mod model;
pub mod naive_bayes;
pub mod selection;
pub mod svm;
pub mod tree;
pub mod vectorizer;
pub mod pipeline;
