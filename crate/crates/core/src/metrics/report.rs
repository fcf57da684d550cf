use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, MetricsError};

/// Precision, recall, F1 and support for one class (or an average).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassReportRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Precision had a zero denominator and was set to 0.
    #[serde(default)]
    pub precision_undefined: bool,
    /// Recall had a zero denominator and was set to 0.
    #[serde(default)]
    pub recall_undefined: bool,
}

impl ClassReportRow {
    /// Builds a row from per-class counts. A zero denominator yields 0 and sets
    /// the matching flag instead of producing NaN.
    pub fn from_counts(correct: u64, predicted: u64, actual: u64) -> Self {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (precision, precision_undefined) = ratio(correct, predicted);
        let (recall, recall_undefined) = ratio(correct, actual);
        ClassReportRow {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
            support: actual,
            precision_undefined,
            recall_undefined,
        }
    }

    /// Row from already-known precision and recall (e.g. a published table).
    pub fn from_scores(precision: f64, recall: f64, support: u64) -> Self {
        ClassReportRow {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
            support,
            ..Default::default()
        }
    }
}

fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Macro (unweighted) and support-weighted means of precision, recall and F1.
/// Both rows carry the summed support.
pub fn average_rows(rows: &[ClassReportRow]) -> (ClassReportRow, ClassReportRow) {
    let total: u64 = rows.iter().map(|r| r.support).sum();
    let n = rows.len() as f64;
    let mean = |f: fn(&ClassReportRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let weighted = |f: fn(&ClassReportRow) -> f64| {
        if total == 0 {
            0.0
        } else {
            rows.iter().map(|r| f(r) * r.support as f64).sum::<f64>() / total as f64
        }
    };
    let macro_avg = ClassReportRow {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        support: total,
        ..Default::default()
    };
    let weighted_avg = ClassReportRow {
        precision: weighted(|r| r.precision),
        recall: weighted(|r| r.recall),
        f1: weighted(|r| r.f1),
        support: total,
        ..Default::default()
    };
    (macro_avg, weighted_avg)
}

/// Full binary report. Accuracy takes the place of the micro average, which
/// coincides with it for binary problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Class 0: no solar panel.
    pub negative: ClassReportRow,
    /// Class 1: solar panel.
    pub positive: ClassReportRow,
    pub accuracy: f64,
    pub macro_avg: ClassReportRow,
    pub weighted_avg: ClassReportRow,
    pub total: u64,
}

pub fn report(m: &ConfusionMatrix) -> Result<ClassificationReport, MetricsError> {
    let total = m.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let positive = ClassReportRow::from_counts(m.tp, m.tp + m.fp, m.tp + m.fn_);
    let negative = ClassReportRow::from_counts(m.tn, m.tn + m.fn_, m.tn + m.fp);
    let (macro_avg, weighted_avg) = average_rows(&[negative, positive]);
    Ok(ClassificationReport {
        negative,
        positive,
        accuracy: (m.tp + m.tn) as f64 / total as f64,
        macro_avg,
        weighted_avg,
        total,
    })
}

/// Rounds half away from zero at two decimals. Values within 1e-9 of a
/// rounding midpoint are treated as lying on it, so a decimal like 0.735
/// rounds to 0.74 regardless of its binary representation.
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let nudged = scaled + 1e-9_f64.copysign(scaled) * 100.0;
    nudged.round() / 100.0
}

impl ClassificationReport {
    /// Plain-text table in the familiar five-column layout, two decimals.
    pub fn render_text(&self) -> String {
        let row = |name: &str, r: &ClassReportRow| {
            format!(
                "{:>12} {:>9.2} {:>9.2} {:>9.2} {:>9}\n",
                name,
                round2(r.precision),
                round2(r.recall),
                round2(r.f1),
                r.support
            )
        };
        let mut out = format!(
            "{:>12} {:>9} {:>9} {:>9} {:>9}\n\n",
            "", "precision", "recall", "f1-score", "support"
        );
        out += &row("0", &self.negative);
        out += &row("1", &self.positive);
        out.push('\n');
        out += &format!(
            "{:>12} {:>9} {:>9} {:>9.2} {:>9}\n",
            "accuracy",
            "",
            "",
            round2(self.accuracy),
            self.total
        );
        out += &row("macro avg", &self.macro_avg);
        out += &row("weighted avg", &self.weighted_avg);
        let flagged: Vec<&str> = [
            (self.negative.precision_undefined, "precision of class 0"),
            (self.negative.recall_undefined, "recall of class 0"),
            (self.positive.precision_undefined, "precision of class 1"),
            (self.positive.recall_undefined, "recall of class 1"),
        ]
        .iter()
        .filter(|(f, _)| *f)
        .map(|(_, n)| *n)
        .collect();
        if !flagged.is_empty() {
            out += &format!("\nundefined (zero division, reported as 0): {}\n", flagged.join(", "));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowDelta {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support_a: u64,
    pub support_b: u64,
}

impl RowDelta {
    fn between(a: &ClassReportRow, b: &ClassReportRow) -> Self {
        RowDelta {
            precision: b.precision - a.precision,
            recall: b.recall - a.recall,
            f1: b.f1 - a.f1,
            support_a: a.support,
            support_b: b.support,
        }
    }
}

/// Field-wise `b − a` between two reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub negative: RowDelta,
    pub positive: RowDelta,
    pub accuracy: f64,
    pub macro_avg: RowDelta,
    pub weighted_avg: RowDelta,
}

pub fn compare_runs(a: &ClassificationReport, b: &ClassificationReport) -> ReportDelta {
    ReportDelta {
        negative: RowDelta::between(&a.negative, &b.negative),
        positive: RowDelta::between(&a.positive, &b.positive),
        accuracy: b.accuracy - a.accuracy,
        macro_avg: RowDelta::between(&a.macro_avg, &b.macro_avg),
        weighted_avg: RowDelta::between(&a.weighted_avg, &b.weighted_avg),
    }
}

impl ReportDelta {
    pub fn render_text(&self) -> String {
        let row = |name: &str, r: &RowDelta| {
            format!(
                "{:>12} {:>+10.2} {:>+10.2} {:>+10.2} {:>9} {:>9}\n",
                name,
                round2(r.precision),
                round2(r.recall),
                round2(r.f1),
                r.support_a,
                r.support_b
            )
        };
        let mut out = format!(
            "{:>12} {:>10} {:>10} {:>10} {:>9} {:>9}\n\n",
            "delta (b-a)", "precision", "recall", "f1-score", "support a", "support b"
        );
        out += &row("0", &self.negative);
        out += &row("1", &self.positive);
        out.push('\n');
        out += &format!("{:>12} {:>10} {:>10} {:>+10.2}\n", "accuracy", "", "", round2(self.accuracy));
        out += &row("macro avg", &self.macro_avg);
        out += &row("weighted avg", &self.weighted_avg);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combined_counts() {
        let r = report(&ConfusionMatrix::new(142, 2277, 7514, 67)).unwrap();
        assert!((r.accuracy - 0.7656).abs() < 1e-4);
        assert!((r.positive.precision - 142.0 / 2419.0).abs() < 1e-15);
        assert!((r.positive.recall - 142.0 / 209.0).abs() < 1e-15);
        assert!((r.positive.precision - 0.0587).abs() < 1e-4);
        assert!((r.positive.recall - 0.6794).abs() < 1e-4);
        assert_eq!(r.positive.support, 209);
        assert_eq!(r.negative.support, 9791);
    }

    #[test]
    fn weighted_precision_from_published_rows() {
        let rows = [
            ClassReportRow::from_scores(0.61, 0.29, 189),
            ClassReportRow::from_scores(0.86, 0.96, 876),
        ];
        let (macro_avg, weighted) = average_rows(&rows);
        assert_eq!(round2(weighted.precision), 0.82);
        assert_eq!(round2(macro_avg.precision), 0.74);
        assert_eq!(weighted.support, 1065);
    }

    #[test]
    fn f1_from_precision_and_recall() {
        let row = ClassReportRow::from_scores(0.85, 0.96, 10);
        assert_eq!(round2(row.f1), 0.90);
    }

    #[test]
    fn zero_division_flags() {
        // nothing predicted positive
        let r = report(&ConfusionMatrix::new(0, 0, 5, 3)).unwrap();
        assert_eq!(r.positive.precision, 0.0);
        assert!(r.positive.precision_undefined);
        assert!(!r.positive.recall_undefined);
        assert_eq!(r.positive.f1, 0.0);
        assert!(r.render_text().contains("precision of class 1"));
        assert!(matches!(report(&ConfusionMatrix::default()), Err(MetricsError::EmptyMatrix)));
    }

    #[test]
    fn equal_supports_make_averages_coincide() {
        let r = report(&ConfusionMatrix::new(7, 2, 8, 3)).unwrap();
        assert_eq!(r.negative.support, r.positive.support);
        assert!((r.macro_avg.precision - r.weighted_avg.precision).abs() < 1e-15);
        assert!((r.macro_avg.f1 - r.weighted_avg.f1).abs() < 1e-15);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round2(0.735), 0.74);
        assert_eq!(round2(0.745), 0.75);
        assert_eq!(round2(0.8156), 0.82);
        assert_eq!(round2(-0.705), -0.71);
        assert_eq!(round2(0.7349), 0.73);
    }

    #[test]
    fn text_layout() {
        let r = report(&ConfusionMatrix::new(142, 2277, 7514, 67)).unwrap();
        let text = r.render_text();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("precision") && lines[0].contains("support"));
        assert!(lines[2].trim_start().starts_with('0'));
        assert!(lines[3].trim_start().starts_with('1'));
        assert!(text.contains("accuracy") && text.contains("0.77") && text.contains("10000"));
        assert!(text.contains("macro avg") && text.contains("weighted avg"));
    }

    #[test]
    fn delta_of_self_is_zero_and_antisymmetric() {
        let a = report(&ConfusionMatrix::new(10, 3, 20, 4)).unwrap();
        let b = report(&ConfusionMatrix::new(4, 30, 2, 9)).unwrap();
        let z = compare_runs(&a, &a);
        assert_eq!(z.accuracy, 0.0);
        assert_eq!(z.positive.precision, 0.0);
        let ab = compare_runs(&a, &b);
        let ba = compare_runs(&b, &a);
        assert_eq!(ab.positive.precision, -ba.positive.precision);
        assert_eq!(ab.weighted_avg.f1, -ba.weighted_avg.f1);
        assert_eq!(ab.positive.support_a, ba.positive.support_b);
    }

    #[test]
    fn cross_site_positive_precision_drop() {
        let validation = ClassificationReport {
            positive: ClassReportRow::from_scores(0.85, 0.96, 1),
            negative: ClassReportRow::default(),
            accuracy: 0.0,
            macro_avg: ClassReportRow::default(),
            weighted_avg: ClassReportRow::default(),
            total: 1,
        };
        let mut on_nrw = validation.clone();
        on_nrw.positive.precision = 0.15;
        let d = compare_runs(&validation, &on_nrw);
        assert_eq!(round2(d.positive.precision), -0.70);
    }
}
