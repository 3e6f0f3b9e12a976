//! Confusion matrices and per-class precision/recall/F1 reports.
//!
//! Conventions: rows are true classes, columns are predicted classes.
//! Precision with an empty predicted column is 0, recall with an empty true
//! row is 0, and F1 is 0 whenever precision + recall is 0. The headline
//! averages weight each class by its support; full-precision values are kept
//! internally and rounded only at display time.

use std::fmt;

use crate::corpus::LabelSet;
use crate::error::{Error, Result};

/// K×K contingency table of true class vs. predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: LabelSet,
    /// row-major counts, `counts[true_k * K + pred_k]`
    counts: Vec<usize>,
}

/// Precision/recall/F1/support for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// A full evaluation report: one row per class plus aggregate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    labels: LabelSet,
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted averages — the headline numbers.
    pub weighted: ClassMetrics,
    /// Unweighted means over classes, reported as a supplementary row.
    pub macro_avg: ClassMetrics,
    /// Fraction of all predictions that are correct.
    pub accuracy: f64,
}

impl ConfusionMatrix {
    /// Tally from parallel slices of class indices (`0..K`).
    pub fn from_indices(labels: &LabelSet, true_k: &[usize], pred_k: &[usize]) -> Result<Self> {
        if true_k.len() != pred_k.len() {
            return Err(Error::LengthMismatch {
                what: "true vs. predicted classes",
                expected: true_k.len(),
                got: pred_k.len(),
            });
        }
        let k = labels.len();
        let mut counts = vec![0usize; k * k];
        for (&t, &p) in true_k.iter().zip(pred_k) {
            if t >= k {
                return Err(Error::LabelOutOfRange { index: t, n_classes: k });
            }
            if p >= k {
                return Err(Error::LabelOutOfRange { index: p, n_classes: k });
            }
            counts[t * k + p] += 1;
        }
        Ok(Self {
            labels: labels.clone(),
            counts,
        })
    }

    /// Tally from label strings; any label absent from the set is an error.
    pub fn from_labels(
        labels: &LabelSet,
        true_labels: &[String],
        pred_labels: &[String],
    ) -> Result<Self> {
        let to_idx = |ls: &[String]| -> Result<Vec<usize>> {
            ls.iter().map(|l| labels.require(l)).collect()
        };
        let t = to_idx(true_labels)?;
        let p = to_idx(pred_labels)?;
        Self::from_indices(labels, &t, &p)
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn count(&self, true_k: usize, pred_k: usize) -> usize {
        self.counts[true_k * self.labels.len() + pred_k]
    }

    /// Total observations in the table.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn row_sum(&self, k: usize) -> usize {
        let n = self.labels.len();
        self.counts[k * n..(k + 1) * n].iter().sum()
    }

    fn col_sum(&self, k: usize) -> usize {
        let n = self.labels.len();
        (0..n).map(|r| self.counts[r * n + k]).sum()
    }

    /// Derive the per-class and aggregate metrics.
    pub fn report(&self) -> Report {
        let k = self.labels.len();
        let mut per_class = Vec::with_capacity(k);
        let mut correct = 0usize;
        for c in 0..k {
            let tp = self.count(c, c);
            correct += tp;
            let pred = self.col_sum(c);
            let truth = self.row_sum(c);
            let precision = if pred == 0 { 0.0 } else { tp as f64 / pred as f64 };
            let recall = if truth == 0 { 0.0 } else { tp as f64 / truth as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            per_class.push(ClassMetrics {
                precision,
                recall,
                f1,
                support: truth,
            });
        }
        let total = self.total();
        let weighted = ClassMetrics {
            precision: weighted_average(per_class.iter().map(|m| (m.precision, m.support))),
            recall: weighted_average(per_class.iter().map(|m| (m.recall, m.support))),
            f1: weighted_average(per_class.iter().map(|m| (m.f1, m.support))),
            support: total,
        };
        let macro_avg = ClassMetrics {
            precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k as f64,
            recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k as f64,
            f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64,
            support: total,
        };
        let accuracy = if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        };
        Report {
            labels: self.labels.clone(),
            per_class,
            weighted,
            macro_avg,
            accuracy,
        }
    }
}

/// Support-weighted mean of `(value, support)` pairs; 0 on zero total support.
pub fn weighted_average<I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (f64, usize)>,
{
    let mut num = 0.0;
    let mut den = 0usize;
    for (v, s) in pairs {
        num += v * s as f64;
        den += s;
    }
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

impl Report {
    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    /// Tab-separated export with full-precision values:
    /// `label  precision  recall  f1  support` plus aggregate rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("label\tprecision\trecall\tf1-score\tsupport\n");
        for (k, m) in self.per_class.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                self.labels.label(k),
                m.precision,
                m.recall,
                m.f1,
                m.support
            ));
        }
        for (name, m) in [("avg / total", &self.weighted), ("macro avg", &self.macro_avg)] {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                name, m.precision, m.recall, m.f1, m.support
            ));
        }
        out.push_str(&format!("accuracy\t\t\t{}\t{}\n", self.accuracy, self.weighted.support));
        out
    }
}

impl fmt::Display for Report {
    /// Classification-report table: one row per class, two-decimal values,
    /// with a support-weighted `avg / total` row and a supplementary
    /// unweighted `macro avg` row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_width = self
            .labels
            .labels()
            .iter()
            .map(|l| l.len())
            .chain(["avg / total".len()])
            .max()
            .unwrap_or(0);
        writeln!(
            f,
            "{:>name_width$}  {:>9}  {:>6}  {:>8}  {:>7}",
            "", "precision", "recall", "f1-score", "support"
        )?;
        writeln!(f)?;
        for (k, m) in self.per_class.iter().enumerate() {
            writeln!(
                f,
                "{:>name_width$}  {:>9.2}  {:>6.2}  {:>8.2}  {:>7}",
                self.labels.label(k),
                m.precision,
                m.recall,
                m.f1,
                m.support
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:>name_width$}  {:>9.2}  {:>6.2}  {:>8.2}  {:>7}",
            "avg / total",
            self.weighted.precision,
            self.weighted.recall,
            self.weighted.f1,
            self.weighted.support
        )?;
        writeln!(
            f,
            "{:>name_width$}  {:>9.2}  {:>6.2}  {:>8.2}  {:>7}",
            "macro avg",
            self.macro_avg.precision,
            self.macro_avg.recall,
            self.macro_avg.f1,
            self.macro_avg.support
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> LabelSet {
        LabelSet::from_labels(names.iter().copied())
    }

    #[test]
    fn two_class_hand_tally() {
        // true [a,a,b,b,a,b], pred [a,b,b,b,a,a]
        let ls = labels(&["a", "b"]);
        let t = vec![0, 0, 1, 1, 0, 1];
        let p = vec![0, 1, 1, 1, 0, 0];
        let cm = ConfusionMatrix::from_indices(&ls, &t, &p).unwrap();
        assert_eq!(cm.count(0, 0), 2);
        assert_eq!(cm.count(0, 1), 1);
        assert_eq!(cm.count(1, 0), 1);
        assert_eq!(cm.count(1, 1), 2);

        let report = cm.report();
        // class a: precision 2/3, recall 2/3, f1 2/3
        let a = report.per_class[0];
        assert!((a.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.support, 3);
    }

    #[test]
    fn f1_hand_value_from_counts() {
        // [[8,2],[3,7]]: class0 p=8/11, r=8/10, f1=2pr/(p+r)=16/21
        let ls = labels(&["a", "b"]);
        let mut t = Vec::new();
        let mut p = Vec::new();
        for (tk, pk, n) in [(0, 0, 8), (0, 1, 2), (1, 0, 3), (1, 1, 7)] {
            for _ in 0..n {
                t.push(tk);
                p.push(pk);
            }
        }
        let report = ConfusionMatrix::from_indices(&ls, &t, &p).unwrap().report();
        let m = report.per_class[0];
        assert!((m.precision - 8.0 / 11.0).abs() < 1e-12);
        assert!((m.recall - 0.8).abs() < 1e-12);
        assert!((m.f1 - 16.0 / 21.0).abs() < 1e-12, "f1 = {}", m.f1);
        assert!((m.f1 - 0.761904).abs() < 1e-6);
    }

    #[test]
    fn four_class_weighted_precision_hand_value() {
        // per-class precision .77/.74/.64/.82 with supports
        // 4527/18440/28586/146009 averages to ~0.785, i.e. 0.79 at two
        // decimals
        let values = [0.77, 0.74, 0.64, 0.82];
        let supports = [4527usize, 18440, 28586, 146009];
        let avg = weighted_average(values.iter().copied().zip(supports.iter().copied()));
        assert!((avg - 0.785342).abs() < 1e-4, "avg = {avg}");
        assert_eq!(format!("{avg:.2}"), "0.79");
        assert_eq!(supports.iter().sum::<usize>(), 197_562);
    }

    #[test]
    fn zero_denominator_conventions() {
        // class b never predicted and never true: precision/recall/f1 all 0
        let ls = labels(&["a", "b"]);
        let report = ConfusionMatrix::from_indices(&ls, &[0, 0], &[0, 0])
            .unwrap()
            .report();
        let b = report.per_class[1];
        assert_eq!(b.precision, 0.0);
        assert_eq!(b.recall, 0.0);
        assert_eq!(b.f1, 0.0);
        assert_eq!(b.support, 0);

        // class b true but never predicted: recall 0, precision 0 (no column)
        let report = ConfusionMatrix::from_indices(&ls, &[0, 1], &[0, 0])
            .unwrap()
            .report();
        assert_eq!(report.per_class[1].recall, 0.0);
        assert_eq!(report.per_class[1].precision, 0.0);
        assert_eq!(report.per_class[1].f1, 0.0);
    }

    #[test]
    fn weighted_recall_equals_accuracy() {
        // support-weighted recall is Σ tp_c / N: exactly the accuracy
        let ls = labels(&["a", "b", "c"]);
        let t = vec![0, 0, 0, 1, 1, 2, 2, 2, 2, 0, 1, 2];
        let p = vec![0, 1, 0, 1, 2, 2, 2, 0, 2, 0, 1, 1];
        let report = ConfusionMatrix::from_indices(&ls, &t, &p).unwrap().report();
        assert!((report.weighted.recall - report.accuracy).abs() < 1e-15);
    }

    #[test]
    fn f1_between_min_and_max_of_p_and_r() {
        let ls = labels(&["a", "b"]);
        let t = vec![0, 0, 0, 0, 1, 1];
        let p = vec![0, 0, 1, 1, 0, 1];
        let report = ConfusionMatrix::from_indices(&ls, &t, &p).unwrap().report();
        for m in &report.per_class {
            let lo = m.precision.min(m.recall);
            let hi = m.precision.max(m.recall);
            assert!(m.f1 >= lo - 1e-15 && m.f1 <= hi + 1e-15);
        }
    }

    #[test]
    fn from_labels_rejects_unknown() {
        let ls = labels(&["a", "b"]);
        let err = ConfusionMatrix::from_labels(
            &ls,
            &["a".into(), "zzz".into()],
            &["a".into(), "b".into()],
        );
        assert!(matches!(err, Err(Error::UnknownLabel { .. })));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let ls = labels(&["a", "b"]);
        assert!(matches!(
            ConfusionMatrix::from_indices(&ls, &[0, 1], &[0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn display_rounds_to_two_decimals_only_at_render() {
        let ls = labels(&["alpha", "b"]);
        let t = vec![0, 0, 0, 1, 1, 1, 1];
        let p = vec![0, 0, 1, 1, 1, 1, 0];
        let report = ConfusionMatrix::from_indices(&ls, &t, &p).unwrap().report();
        let text = format!("{report}");
        assert!(text.contains("precision"), "{text}");
        assert!(text.contains("avg / total"), "{text}");
        assert!(text.contains("0.67"), "{text}");
        // underlying value stays full precision
        assert!((report.per_class[0].precision - 2.0 / 3.0).abs() < 1e-12);
        // rendering is stable
        assert_eq!(text, format!("{report}"));
    }

    #[test]
    fn tsv_has_header_and_rows() {
        let ls = labels(&["a", "b"]);
        let report = ConfusionMatrix::from_indices(&ls, &[0, 1], &[0, 1])
            .unwrap()
            .report();
        let tsv = report.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "label\tprecision\trecall\tf1-score\tsupport");
        assert_eq!(lines.len(), 1 + 2 + 2 + 1); // header, 2 classes, 2 averages, accuracy
        assert!(lines[1].starts_with("a\t1\t1\t1\t1"));
    }
}
