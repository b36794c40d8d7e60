//! Classification metrics: accuracy, precision, recall, and F1 from
//! one-vs-rest confusion counts.

use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Per-class confusion counts over a prediction set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    classes: Vec<ClassCounts>,
    total: usize,
}

impl ConfusionCounts {
    /// Each class's four counts must sum to the same total.
    pub fn from_classes(classes: Vec<ClassCounts>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidParameter(
                "confusion counts need at least one class".to_string(),
            ));
        }
        let total = classes[0].total();
        if total == 0 || classes.iter().any(|c| c.total() != total) {
            return Err(Error::InvalidParameter(
                "per-class counts must sum to one positive total".to_string(),
            ));
        }
        Ok(Self { classes, total })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, k: usize) -> &ClassCounts {
        &self.classes[k]
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Number of correct predictions (diagonal of the confusion matrix).
    pub fn correct(&self) -> usize {
        self.classes.iter().map(|c| c.true_pos).sum()
    }
}

/// Averaging mode for the precision/recall/F1 triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Averaging {
    /// Report the positive class (index 1) of a binary problem.
    BinaryPositiveClass,
    /// Unweighted mean of per-class precision/recall/F1.
    Macro,
}

impl Averaging {
    pub fn as_str(&self) -> &'static str {
        match self {
            Averaging::BinaryPositiveClass => "binary_positive_class",
            Averaging::Macro => "macro",
        }
    }

    /// The conventional choice for a given class count: binary for two
    /// classes, macro otherwise.
    pub fn for_num_classes(num_classes: usize) -> Self {
        if num_classes == 2 {
            Averaging::BinaryPositiveClass
        } else {
            Averaging::Macro
        }
    }
}

/// Accuracy, precision, recall, and F1, all in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
}

/// One-vs-rest confusion counts from parallel prediction/label slices.
pub fn confusion(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionCounts> {
    if preds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    if let Some(&bad) = preds.iter().chain(labels.iter()).find(|&&v| v >= num_classes) {
        return Err(Error::InvalidParameter(format!(
            "class index {bad} out of range for {num_classes} classes"
        )));
    }
    let mut classes = vec![ClassCounts::default(); num_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        for (k, counts) in classes.iter_mut().enumerate() {
            match (p == k, l == k) {
                (true, true) => counts.true_pos += 1,
                (true, false) => counts.false_pos += 1,
                (false, true) => counts.false_neg += 1,
                (false, false) => counts.true_neg += 1,
            }
        }
    }
    ConfusionCounts::from_classes(classes)
}

fn ratio(num: usize, den: usize) -> f64 {
    // zero denominators yield 0 by convention, keeping reports CSV-safe
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn class_prf(counts: &ClassCounts) -> (f64, f64, f64) {
    let precision = ratio(counts.true_pos, counts.true_pos + counts.false_pos);
    let recall = ratio(counts.true_pos, counts.true_pos + counts.false_neg);
    (precision, recall, f1_score(precision, recall))
}

/// Metrics from confusion counts. Accuracy is always `correct / total`;
/// precision/recall/F1 follow the averaging mode.
pub fn metrics(counts: &ConfusionCounts, averaging: Averaging) -> MetricsReport {
    let accuracy = counts.correct() as f64 / counts.total() as f64;
    let (precision, recall, f1) = match averaging {
        Averaging::BinaryPositiveClass => {
            let positive = if counts.num_classes() > 1 { 1 } else { 0 };
            class_prf(counts.class(positive))
        }
        Averaging::Macro => {
            let k = counts.num_classes() as f64;
            let mut sums = (0.0, 0.0, 0.0);
            for class in &counts.classes {
                let (p, r, f) = class_prf(class);
                sums.0 += p;
                sums.1 += r;
                sums.2 += f;
            }
            (sums.0 / k, sums.1 / k, sums.2 / k)
        }
    };
    MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        averaging,
    }
}

/// Header line for metrics CSV files.
pub const CSV_HEADER: &str = "model_tag,accuracy,precision,recall,f1";

/// The machine-readable metrics row, four decimal places per value.
pub fn csv_row(tag: &str, report: &MetricsReport) -> String {
    format!(
        "{},{:.4},{:.4},{:.4},{:.4}",
        tag, report.accuracy, report.precision, report.recall, report.f1
    )
}
