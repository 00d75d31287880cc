//! Confusion matrices and the four headline metrics (accuracy,
//! sensitivity, predictivity, specificity), with MI as the positive
//! class.
//!
//! One documented quirk: the published VGG-MI1 without-noise results
//! report a sensitivity of 98.76 alongside counts that recompute to
//! 98.98, and the companion summary table prints TP 78,149 where the
//! per-class table has 78,419. This module reproduces the arithmetic,
//! not the misprints.

use thiserror::Error;

use crate::Label;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// Binary confusion matrix; `fn_` is the false-negative count (`fn` is
/// reserved).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Tally one prediction.
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Mi, Label::Mi) => self.tp += 1,
            (Label::Mi, _) => self.fn_ += 1,
            (_, Label::Mi) => self.fp += 1,
            _ => self.tn += 1,
        }
    }

    /// Elementwise sum (used to pool per-fold matrices).
    pub fn add(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// Percentages in [0, 100]; a metric whose denominator is zero is
/// `None` (undefined), never silently 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub predictivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Acc = (TP+TN)/total, Se = TP/(TP+FN), Pre = TP/(TP+FP),
/// Spe = TN/(TN+FP), each ×100.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64 * 100.0)
        }
    };
    Ok(Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_),
        predictivity: ratio(cm.tp, cm.tp + cm.fp),
        specificity: ratio(cm.tn, cm.tn + cm.fp),
    })
}
