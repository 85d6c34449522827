//! Classification metrics over three-level targets.
//!
//! Binary metrics follow the one-vs-rest convention; the aggregate report
//! macro-averages them over the classes that actually occur in the reference
//! labels. Two F1 flavors are kept side by side: `f1` as the harmonic mean of
//! sensitivity and specificity, and `f1_standard` as the usual
//! precision/recall harmonic mean. Empty denominators yield 0 rather than
//! NaN so reports stay printable.

use serde::{Deserialize, Serialize};

/// One-vs-rest confusion counts for a single class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio((self.tp + self.tn) as f64, self.total() as f64)
    }

    /// True-positive rate (recall).
    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    /// True-negative rate.
    pub fn specificity(&self) -> f64 {
        ratio(self.tn as f64, (self.tn + self.fp) as f64)
    }

    pub fn balanced_accuracy(&self) -> f64 {
        (self.sensitivity() + self.specificity()) / 2.0
    }

    /// Harmonic mean of sensitivity and specificity.
    pub fn f1(&self) -> f64 {
        let (se, sp) = (self.sensitivity(), self.specificity());
        ratio(2.0 * se * sp, se + sp)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    /// Harmonic mean of precision and recall.
    pub fn f1_standard(&self) -> f64 {
        let (p, r) = (self.precision(), self.sensitivity());
        ratio(2.0 * p * r, p + r)
    }
}

/// `3x3` confusion matrix over single-dimension levels in `{-1, 0, +1}`;
/// rows index the reference level, columns the predicted level, both through
/// `level + 1`.
pub fn confusion_matrix(y_true: &[i8], y_pred: &[i8]) -> [[u64; 3]; 3] {
    assert_eq!(y_true.len(), y_pred.len(), "label slices must align");
    let mut m = [[0u64; 3]; 3];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        assert!((-1..=1).contains(&t) && (-1..=1).contains(&p), "level outside {{-1, 0, +1}}");
        m[(t + 1) as usize][(p + 1) as usize] += 1;
    }
    m
}

/// Macro-averaged one-vs-rest metrics for one predicted dimension.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub f1_standard: f64,
    pub n_samples: u64,
}

impl MetricsReport {
    pub fn from_labels(y_true: &[i8], y_pred: &[i8]) -> Self {
        Self::from_confusion(&confusion_matrix(y_true, y_pred))
    }

    /// Average one-vs-rest metrics over classes present in the reference
    /// labels (rows with any mass). Plain accuracy stays micro: the trace
    /// over the total.
    pub fn from_confusion(m: &[[u64; 3]; 3]) -> Self {
        let total: u64 = m.iter().flatten().sum();
        let trace: u64 = (0..3).map(|k| m[k][k]).sum();
        let mut report = MetricsReport {
            accuracy: ratio(trace as f64, total as f64),
            n_samples: total,
            ..Default::default()
        };
        let mut present = 0.0;
        for k in 0..3 {
            let row: u64 = m[k].iter().sum();
            if row == 0 {
                continue;
            }
            present += 1.0;
            let col: u64 = (0..3).map(|r| m[r][k]).sum();
            let counts = BinaryCounts {
                tp: m[k][k],
                fp: col - m[k][k],
                fn_: row - m[k][k],
                tn: total - row - (col - m[k][k]),
            };
            report.sensitivity += counts.sensitivity();
            report.specificity += counts.specificity();
            report.balanced_accuracy += counts.balanced_accuracy();
            report.f1 += counts.f1();
            report.f1_standard += counts.f1_standard();
        }
        if present > 0.0 {
            report.sensitivity /= present;
            report.specificity /= present;
            report.balanced_accuracy /= present;
            report.f1 /= present;
            report.f1_standard /= present;
        }
        report
    }
}
