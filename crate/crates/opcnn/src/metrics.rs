//! Confusion-matrix bookkeeping and the evaluation quantities: accuracy,
//! precision, recall, F1, and the accuracy-gain ratio α.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// TP/FP/FN/TN tallies. Positive class = deceptive = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// A metric value with a flag marking zero-denominator degeneracy
/// (value reported as 0 so CSV output stays numeric).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub value: f64,
    pub degenerate: bool,
}

impl Metric {
    fn ratio(num: f64, den: f64) -> Metric {
        if den == 0.0 {
            Metric {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Metric {
                value: num / den,
                degenerate: false,
            }
        }
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "confusion: {} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        if p > 1 || y > 1 {
            return Err(Error::InvalidArgument(
                "confusion: values must be 0 or 1".into(),
            ));
        }
        match (p, y) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 1) => c.fn_ += 1,
            (0, 0) => c.tn += 1,
            _ => unreachable!(),
        }
    }
    Ok(c)
}

/// P = TP / (TP + FP)
pub fn precision(c: &ConfusionCounts) -> Metric {
    Metric::ratio(c.tp as f64, (c.tp + c.fp) as f64)
}

/// R = TP / (TP + FN)
pub fn recall(c: &ConfusionCounts) -> Metric {
    Metric::ratio(c.tp as f64, (c.tp + c.fn_) as f64)
}

/// F1 = 2PR / (P + R), computed via the equivalent 2TP/(2TP+FP+FN) form.
pub fn f1(c: &ConfusionCounts) -> Metric {
    Metric::ratio(2.0 * c.tp as f64, (2 * c.tp + c.fp + c.fn_) as f64)
}

/// Accuracy = (TP + TN) / total.
pub fn accuracy(c: &ConfusionCounts) -> Metric {
    Metric::ratio((c.tp + c.tn) as f64, c.total() as f64)
}

/// Accuracy gain α = F_e / F_c: experimental-group accuracy over control.
pub fn accuracy_gain(f_e: f64, f_c: f64) -> Result<f64> {
    if f_c <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "accuracy_gain: control accuracy must be > 0, got {f_c}"
        )));
    }
    Ok(f_e / f_c)
}

/// One report row per method: the published-table shape.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    pub accuracy: Metric,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

impl MethodReport {
    pub fn from_counts(method: impl Into<String>, c: &ConfusionCounts) -> Self {
        MethodReport {
            method: method.into(),
            accuracy: accuracy(c),
            precision: precision(c),
            recall: recall(c),
            f1: f1(c),
        }
    }

    pub const CSV_HEADER: &'static str = "method,accuracy,precision,recall,f1,degenerate";

    pub fn csv_row(&self) -> String {
        let degenerate = self.accuracy.degenerate
            || self.precision.degenerate
            || self.recall.degenerate
            || self.f1.degenerate;
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            self.method,
            self.accuracy.value,
            self.precision.value,
            self.recall.value,
            self.f1.value,
            degenerate
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_hand_tally() {
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );

        let perfect = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(perfect.fp, 0);
        assert_eq!(perfect.fn_, 0);

        let inverted = confusion(&[0, 1, 0], &[1, 0, 1]).unwrap();
        assert_eq!(inverted.tp, 0);
        assert_eq!(inverted.tn, 0);

        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn metric_formulas() {
        let c = ConfusionCounts {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 0,
        };
        assert!((precision(&c).value - 0.75).abs() < 1e-12);
        assert!((recall(&c).value - 0.6).abs() < 1e-12);
        assert!((f1(&c).value - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);

        let degenerate = ConfusionCounts {
            tp: 0,
            fp: 0,
            fn_: 3,
            tn: 2,
        };
        let p = precision(&degenerate);
        assert_eq!(p.value, 0.0);
        assert!(p.degenerate);
    }

    #[test]
    fn f1_equals_p_when_p_equals_r() {
        // P = R whenever FP = FN.
        let c = ConfusionCounts {
            tp: 4,
            fp: 2,
            fn_: 2,
            tn: 1,
        };
        let p = precision(&c).value;
        assert!((f1(&c).value - p).abs() < 1e-12);
    }

    #[test]
    fn accuracy_gain_ratios() {
        assert!((accuracy_gain(0.7002, 0.6733).unwrap() - 1.04).abs() < 5e-4);
        assert_eq!(accuracy_gain(0.5, 0.5).unwrap(), 1.0);
        assert!((accuracy_gain(0.8450, 0.8204).unwrap() - 1.03).abs() < 5e-4);
        assert!(accuracy_gain(0.5, 0.0).is_err());
    }

    proptest! {
        // Both algebraic forms of F1 agree on non-degenerate counts.
        #[test]
        fn f1_two_forms_agree(tp in 1usize..500, fp in 0usize..500, fn_ in 0usize..500, tn in 0usize..500) {
            let c = ConfusionCounts { tp, fp, fn_, tn };
            let p = precision(&c).value;
            let r = recall(&c).value;
            let harmonic = 2.0 * p * r / (p + r);
            prop_assert!((f1(&c).value - harmonic).abs() < 1e-12);
        }

        // α > 1 iff F_e > F_c for positive inputs.
        #[test]
        fn gain_ordering(fe in 0.01f64..1.0, fc in 0.01f64..1.0) {
            let a = accuracy_gain(fe, fc).unwrap();
            prop_assert_eq!(a > 1.0, fe > fc);
        }

        // Swapping the positive-class convention leaves accuracy unchanged.
        #[test]
        fn accuracy_class_symmetric(preds in proptest::collection::vec(0u8..2, 1..60),
                                    seed in proptest::collection::vec(0u8..2, 60)) {
            let labels = &seed[..preds.len()];
            let c = confusion(&preds, labels).unwrap();
            let flipped_preds: Vec<u8> = preds.iter().map(|p| 1 - p).collect();
            let flipped_labels: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
            let cf = confusion(&flipped_preds, &flipped_labels).unwrap();
            prop_assert_eq!(accuracy(&c).value, accuracy(&cf).value);
        }
    }
}
