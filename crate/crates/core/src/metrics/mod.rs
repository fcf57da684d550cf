//! Binary classification metrics in the classic per-class report layout
//! (rows for class 0 and 1, then accuracy, macro avg and weighted avg).

mod detection;
mod io;
mod report;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detection::{detections_to_label, BoxPx, Detection, DEFAULT_DETECTION_THRESHOLD};
pub use io::{read_detections, read_labels, read_predictions, write_labels, write_scores, Predictions};
pub use report::{
    average_rows, compare_runs, report, round2, ClassReportRow, ClassificationReport, ReportDelta, RowDelta,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction and truth keys differ: {}", .0.join(", "))]
    KeyMismatch(Vec<String>),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    Negative,
    Positive,
}

impl BinaryLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            BinaryLabel::Negative => "negative",
            BinaryLabel::Positive => "positive",
        }
    }

    /// Accepts `positive/negative`, `pos/neg` and `1/0`.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" => Some(BinaryLabel::Positive),
            "negative" | "neg" | "0" => Some(BinaryLabel::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `score ≥ threshold` is positive. Both ends of the comparison are inclusive.
pub fn threshold_label(score: f64, threshold: f64) -> Result<BinaryLabel, MetricsError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(MetricsError::ScoreOutOfRange(score));
    }
    Ok(if score >= threshold {
        BinaryLabel::Positive
    } else {
        BinaryLabel::Negative
    })
}

/// Binary counts; the positive class is "contains a solar panel".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Percentage of the total, e.g. `share(fp)`.
    pub fn share(&self, count: u64) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            count as f64 / self.total() as f64 * 100.0
        }
    }

    /// Result / Amount / % of total table.
    pub fn render_shares(&self) -> String {
        let rows = [
            ("False Negative", self.fn_),
            ("False Positive", self.fp),
            ("True Negative", self.tn),
            ("True Positive", self.tp),
        ];
        let mut out = format!("{:<16}{:>10}{:>14}\n", "Result", "Amount", "% of total");
        for (name, n) in rows {
            out.push_str(&format!("{:<16}{:>10}{:>14.2}\n", name, n, round2(self.share(n))));
        }
        out.push_str(&format!("{:<16}{:>10}{:>14.2}\n", "Total", self.total(), 100.0));
        out
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix::new(self.tp + o.tp, self.fp + o.fp, self.tn + o.tn, self.fn_ + o.fn_)
    }
}

/// Counts agreement between predictions and ground truth over identical key sets.
pub fn confusion(
    predicted: &HashMap<String, BinaryLabel>,
    truth: &HashMap<String, BinaryLabel>,
) -> Result<ConfusionMatrix, MetricsError> {
    let mut diff: BTreeSet<&String> = predicted.keys().filter(|k| !truth.contains_key(*k)).collect();
    diff.extend(truth.keys().filter(|k| !predicted.contains_key(*k)));
    if !diff.is_empty() {
        return Err(MetricsError::KeyMismatch(diff.into_iter().cloned().collect()));
    }
    let mut m = ConfusionMatrix::default();
    for (id, p) in predicted {
        match (p, truth[id]) {
            (BinaryLabel::Positive, BinaryLabel::Positive) => m.tp += 1,
            (BinaryLabel::Positive, BinaryLabel::Negative) => m.fp += 1,
            (BinaryLabel::Negative, BinaryLabel::Negative) => m.tn += 1,
            (BinaryLabel::Negative, BinaryLabel::Positive) => m.fn_ += 1,
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: &[bool]) -> HashMap<String, BinaryLabel> {
        pos.iter()
            .enumerate()
            .map(|(i, &p)| {
                (
                    format!("t{i}"),
                    if p { BinaryLabel::Positive } else { BinaryLabel::Negative },
                )
            })
            .collect()
    }

    #[test]
    fn perfect_agreement() {
        let truth = labels(&[true, true, true, true, false, false, false, false, false, false]);
        assert_eq!(confusion(&truth, &truth).unwrap(), ConfusionMatrix::new(4, 0, 6, 0));
    }

    #[test]
    fn complement() {
        let truth = labels(&[true, false, true]);
        let pred = labels(&[false, true, false]);
        let m = confusion(&pred, &truth).unwrap();
        assert_eq!((m.tp, m.tn), (0, 0));
        assert_eq!((m.fp, m.fn_), (1, 2));
    }

    #[test]
    fn key_mismatch_lists_symmetric_difference() {
        let truth = labels(&[true, false]);
        let mut pred = labels(&[true]);
        pred.insert("extra".into(), BinaryLabel::Negative);
        match confusion(&pred, &truth).unwrap_err() {
            MetricsError::KeyMismatch(keys) => assert_eq!(keys, vec!["extra".to_string(), "t1".to_string()]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn combined_table_shares() {
        let m = ConfusionMatrix::new(142, 2277, 7514, 67);
        assert_eq!(m.total(), 10_000);
        let text = m.render_shares();
        assert!(text.contains("22.77"), "{text}");
        assert!(text.contains("75.14"));
        assert!(text.contains("0.67"));
        assert!(text.contains("1.42"));
    }

    #[test]
    fn per_site_tables_add_up() {
        let bonn = ConfusionMatrix::new(105, 2100, 3027, 14);
        let dueren = ConfusionMatrix::new(37, 177, 4487, 53);
        assert_eq!(bonn + dueren, ConfusionMatrix::new(142, 2277, 7514, 67));
    }

    #[test]
    fn inclusive_threshold() {
        assert_eq!(threshold_label(0.5, 0.5).unwrap(), BinaryLabel::Positive);
        assert_eq!(threshold_label(0.49, 0.5).unwrap(), BinaryLabel::Negative);
        assert!(threshold_label(1.2, 0.5).is_err());
    }
}
