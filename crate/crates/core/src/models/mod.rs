//! Classifiers: boosted trees (primary) and SVM baselines, plus label voting.

mod gbm;
mod svm;
mod tree;

use ndarray::ArrayView2;
use thiserror::Error;

pub use gbm::{log_loss, sigmoid, GbmModel};
pub use svm::{auto_gamma, LinearSvmModel, RbfSvmModel};
pub use tree::TreeNode;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("training matrix has no feature columns")]
    NoFeatures,
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("labels must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("non-finite value in training matrix at row {0}")]
    NonFinite(usize),
    #[error("input has {got} features, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("SMO did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("cannot vote on an empty label list")]
    EmptyVote,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RbfGamma {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub svm_c: f64,
    pub rbf_gamma: RbfGamma,
    pub svm_epochs: usize,
    pub smo_tol: f64,
    pub smo_max_iter: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            svm_c: 1.0,
            rbf_gamma: RbfGamma::Auto,
            svm_epochs: 50,
            smo_tol: 1e-3,
            smo_max_iter: 1_000_000,
            seed: 0,
        }
    }
}

pub(crate) fn check_training_data(x: ArrayView2<f64>, y: &[u8]) -> Result<(), ModelError> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(ModelError::LabelCount {
            rows: n,
            labels: y.len(),
        });
    }
    if n < 2 {
        return Err(ModelError::TooFewRows(n));
    }
    if d == 0 {
        return Err(ModelError::NoFeatures);
    }
    if let Some(&bad) = y.iter().find(|&&t| t > 1) {
        return Err(ModelError::BadLabel(bad));
    }
    if y.iter().all(|&t| t == y[0]) {
        return Err(ModelError::SingleClass);
    }
    if let Some((i, _)) = x
        .rows()
        .into_iter()
        .enumerate()
        .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
    {
        return Err(ModelError::NonFinite(i));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Gbm,
    LinearSvm,
    RbfSvm,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Gbm => "gbm",
            ClassifierKind::LinearSvm => "svm-linear",
            ClassifierKind::RbfSvm => "svm-rbf",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gbm" => Ok(ClassifierKind::Gbm),
            "svm-linear" | "linear" => Ok(ClassifierKind::LinearSvm),
            "svm-rbf" | "rbf" => Ok(ClassifierKind::RbfSvm),
            other => Err(ModelError::Config(format!(
                "unknown classifier `{other}` (expected gbm, svm-linear or svm-rbf)"
            ))),
        }
    }
}

/// A trained classifier of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Gbm(GbmModel),
    LinearSvm(LinearSvmModel),
    RbfSvm(RbfSvmModel),
}

impl Classifier {
    pub fn train(kind: ClassifierKind, x: ArrayView2<f64>, y: &[u8], config: &TrainConfig) -> Result<Self, ModelError> {
        Ok(match kind {
            ClassifierKind::Gbm => Classifier::Gbm(GbmModel::train(x, y, config)?),
            ClassifierKind::LinearSvm => Classifier::LinearSvm(LinearSvmModel::train(x, y, config)?),
            ClassifierKind::RbfSvm => Classifier::RbfSvm(RbfSvmModel::train(x, y, config)?),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Gbm(_) => ClassifierKind::Gbm,
            Classifier::LinearSvm(_) => ClassifierKind::LinearSvm,
            Classifier::RbfSvm(_) => ClassifierKind::RbfSvm,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Gbm(m) => m.n_features,
            Classifier::LinearSvm(m) => m.n_features(),
            Classifier::RbfSvm(m) => m.n_features,
        }
    }

    /// Probability for the GBM, raw decision value for the SVMs.
    pub fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        match self {
            Classifier::Gbm(m) => m.predict_proba(x),
            Classifier::LinearSvm(m) => m.decision(x),
            Classifier::RbfSvm(m) => m.decision(x),
        }
    }

    /// Score at which the label switches to 1 (inclusive).
    pub fn threshold(&self) -> f64 {
        match self {
            Classifier::Gbm(_) => 0.5,
            _ => 0.0,
        }
    }

    pub fn label_for(&self, score: f64) -> u8 {
        (score >= self.threshold()) as u8
    }
}

/// Majority vote over sub-segment labels; an exact tie resolves to 1.
pub fn vote_aggregate(labels: &[u8]) -> Result<u8, ModelError> {
    if labels.is_empty() {
        return Err(ModelError::EmptyVote);
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    Ok((2 * ones >= labels.len()) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn votes() {
        assert_eq!(vote_aggregate(&[1, 1, 0, 1, 0]).unwrap(), 1);
        assert_eq!(vote_aggregate(&[0, 0, 0, 0, 1]).unwrap(), 0);
        assert_eq!(vote_aggregate(&[1, 0]).unwrap(), 1);
        assert_eq!(vote_aggregate(&[]), Err(ModelError::EmptyVote));
    }

    #[test]
    fn classifier_names_parse() {
        for k in [ClassifierKind::Gbm, ClassifierKind::LinearSvm, ClassifierKind::RbfSvm] {
            assert_eq!(k.name().parse::<ClassifierKind>().unwrap(), k);
        }
        assert!("forest".parse::<ClassifierKind>().is_err());
    }

    proptest! {
        #[test]
        fn vote_is_permutation_invariant(mut labels in proptest::collection::vec(0u8..2, 1..30), seed in any::<u64>()) {
            let before = vote_aggregate(&labels).unwrap();
            let mut s = seed | 1;
            for i in (1..labels.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                labels.swap(i, (s % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(vote_aggregate(&labels).unwrap(), before);
        }
    }
}
