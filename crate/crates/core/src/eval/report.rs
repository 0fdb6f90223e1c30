use std::fmt;

use super::{check_labels, check_len, EvalError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    /// Indexed by class label.
    pub classes: [ClassMetrics; 2],
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_report(pred: &[u8], labels: &[u8]) -> Result<ClassReport, EvalError> {
    check_len("predictions", labels.len(), pred.len())?;
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    check_labels(labels)?;
    check_labels(pred)?;
    // confusion[truth][pred]
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &t) in pred.iter().zip(labels) {
        confusion[t as usize][p as usize] += 1;
    }
    let metrics = |c: usize| {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let support = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    };
    let classes = [metrics(0), metrics(1)];
    let n = labels.len() as f64;
    Ok(ClassReport {
        macro_f1: (classes[0].f1 + classes[1].f1) / 2.0,
        weighted_f1: classes.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / n,
        accuracy: (confusion[0][0] + confusion[1][1]) as f64 / n,
        classes,
    })
}

/// `key=value` lines, one metric per line.
impl fmt::Display for ClassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, m) in self.classes.iter().enumerate() {
            writeln!(f, "class_{c}_precision={:?}", m.precision)?;
            writeln!(f, "class_{c}_recall={:?}", m.recall)?;
            writeln!(f, "class_{c}_f1={:?}", m.f1)?;
            writeln!(f, "class_{c}_support={}", m.support)?;
        }
        writeln!(f, "macro_f1={:?}", self.macro_f1)?;
        writeln!(f, "weighted_f1={:?}", self.weighted_f1)?;
        writeln!(f, "accuracy={:?}", self.accuracy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect() {
        let r = classification_report(&[0, 1, 0, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.classes.iter().all(|c| c.f1 == 1.0));
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn all_positive_predictions() {
        let r = classification_report(&[1, 1], &[0, 1]).unwrap();
        assert_eq!(r.classes[1].precision, 0.5);
        assert_eq!(r.classes[1].recall, 1.0);
        assert!((r.classes[1].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.classes[0].precision, 0.0);
        assert_eq!(r.classes[0].f1, 0.0);
    }

    #[test]
    fn hand_counted_confusion() {
        // tp=2 fp=1 fn=1 tn=2
        let r = classification_report(&[1, 0, 1, 1, 0, 0], &[1, 1, 0, 1, 0, 0]).unwrap();
        assert!((r.accuracy - 4.0 / 6.0).abs() < 1e-15);
        assert!((r.classes[1].precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.classes[1].recall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.classes[0].support + r.classes[1].support, 6);
    }

    #[test]
    fn errors_and_text() {
        assert!(matches!(
            classification_report(&[1], &[1, 0]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert_eq!(classification_report(&[], &[]), Err(EvalError::Empty));
        let text = classification_report(&[1, 0], &[1, 0]).unwrap().to_string();
        assert!(text.contains("accuracy=1.0\n"));
        assert!(text.contains("class_1_support=1\n"));
    }

    proptest! {
        #[test]
        fn weighted_f1_is_support_weighted(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..80)) {
            let (pred, labels): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let r = classification_report(&pred, &labels).unwrap();
            let n = labels.len();
            prop_assert_eq!(r.classes[0].support + r.classes[1].support, n);
            let expect = (r.classes[0].f1 * r.classes[0].support as f64
                + r.classes[1].f1 * r.classes[1].support as f64) / n as f64;
            prop_assert!((r.weighted_f1 - expect).abs() <= 1e-12);
            for c in &r.classes {
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
