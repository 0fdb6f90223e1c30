//! Evaluation: ROC/AUC, classification reports, per-group AUC tables and the
//! Bayesian signed-rank comparison of paired model scores.

mod bayes;
mod report;
mod roc;

use thiserror::Error;

pub use bayes::{bayes_signed_rank, bayes_signed_rank_partitioned, PosteriorSummary, DEFAULT_N_MC};
pub use report::{classification_report, ClassMetrics, ClassReport};
pub use roc::{per_group_auc, roc_auc, GroupAuc, GroupAucTable, RocCurve};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("AUC is undefined: labels contain a single class")]
    SingleClass,
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty input")]
    Empty,
    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(u8),
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("signed-rank test needs at least 2 differences, got {0}")]
    TooFewDifferences(usize),
    #[error("rope must be finite and non-negative, got {0}")]
    BadRope(f64),
    #[error("n_mc must be positive")]
    NoIterations,
}

fn check_labels(labels: &[u8]) -> Result<(), EvalError> {
    match labels.iter().find(|&&l| l > 1) {
        Some(&l) => Err(EvalError::InvalidLabel(l)),
        None => Ok(()),
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), EvalError> {
    if expected != got {
        return Err(EvalError::LengthMismatch { what, expected, got });
    }
    Ok(())
}
