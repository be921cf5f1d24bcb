//! Evaluation math: confusion matrix, per-class and averaged
//! precision/recall/F1, Cohen's kappa, one-vs-rest macro AUC, and the text/CSV
//! renderings of the classification report.
//!
//! Undefined ratios (a class never predicted, or never present) are reported
//! as 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, NUM_CLASSES};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|k| self.counts[k][k]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for l in Label::ALL {
            s.push(',');
            s.push_str(l.as_str());
        }
        s.push('\n');
        for (k, row) in self.counts.iter().enumerate() {
            s.push_str(Label::ALL[k].as_str());
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("cannot build a confusion matrix from zero examples".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: [ClassMetrics; NUM_CLASSES],
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub kappa: f64,
    /// `None` renders as "n/a" (no probability scores, or no class had both
    /// positives and negatives).
    pub auc_macro: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub wall_time_s: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Chance-corrected agreement `(p_o − p_e) / (1 − p_e)`. `p_e = 1` only when
/// every count sits in one diagonal cell, which is scored as perfect agreement (1).
pub fn cohen_kappa(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let p_o = cm.trace() as f64 / n;
    let p_e = (0..NUM_CLASSES)
        .map(|k| cm.row_sum(k) as f64 * cm.col_sum(k) as f64)
        .sum::<f64>()
        / (n * n);
    if p_e >= 1.0 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

pub fn report(cm: &ConfusionMatrix, probs: Option<&[[f64; NUM_CLASSES]]>, y_true: &[Label]) -> EvalReport {
    let total = cm.total();
    let mut per_class = [ClassMetrics::default(); NUM_CLASSES];
    for (k, m) in per_class.iter_mut().enumerate() {
        let tp = cm.counts[k][k];
        m.precision = ratio(tp, cm.col_sum(k));
        m.recall = ratio(tp, cm.row_sum(k));
        m.f1 = harmonic(m.precision, m.recall);
        m.support = cm.row_sum(k);
    }
    let macro_avg = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / NUM_CLASSES as f64;
    let weighted_avg = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
        }
    };
    EvalReport {
        per_class,
        accuracy: ratio(cm.trace(), total),
        macro_precision: macro_avg(|m| m.precision),
        macro_recall: macro_avg(|m| m.recall),
        macro_f1: macro_avg(|m| m.f1),
        weighted_precision: weighted_avg(|m| m.precision),
        weighted_recall: weighted_avg(|m| m.recall),
        weighted_f1: weighted_avg(|m| m.f1),
        kappa: cohen_kappa(cm),
        auc_macro: probs.and_then(|p| auc_ovr(p, y_true)),
        confusion: *cm,
        wall_time_s: 0.0,
    }
}

/// Convenience: confusion matrix plus report in one call.
pub fn evaluate(y_true: &[Label], y_pred: &[Label], probs: Option<&[[f64; NUM_CLASSES]]>) -> Result<EvalReport> {
    let cm = confusion(y_true, y_pred)?;
    Ok(report(&cm, probs, y_true))
}

/// Mann–Whitney AUC of `scores` for the positive set, with midranks for ties.
/// `None` when either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n = scores.len();
    let m = positive.iter().filter(|&&p| p).count();
    if m == 0 || m == n {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = (0..n).filter(|&i| positive[i]).map(|i| ranks[i]).sum();
    let m = m as f64;
    Some((rank_sum - m * (m + 1.0) / 2.0) / (m * (n as f64 - m)))
}

/// Unweighted mean of the per-class one-vs-rest AUCs that are defined.
pub fn auc_ovr(scores: &[[f64; NUM_CLASSES]], y_true: &[Label]) -> Option<f64> {
    let aucs: Vec<f64> = (0..NUM_CLASSES)
        .filter_map(|k| {
            let col: Vec<f64> = scores.iter().map(|s| s[k]).collect();
            let pos: Vec<bool> = y_true.iter().map(|y| y.index() == k).collect();
            binary_auc(&col, &pos)
        })
        .collect();
    if aucs.is_empty() {
        None
    } else {
        Some(aucs.iter().sum::<f64>() / aucs.len() as f64)
    }
}

pub fn fmt_auc(auc: Option<f64>, decimals: usize) -> String {
    match auc {
        Some(v) => format!("{v:.decimals$}"),
        None => "n/a".to_string(),
    }
}

/// Aligned plain-text classification report (class, precision, recall,
/// F1-score, support) followed by accuracy and averaged rows.
pub fn render_classification_report(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14}{:>10}{:>10}{:>10}{:>10}", "Class", "Precision", "Recall", "F1-Score", "Support");
    for (k, m) in r.per_class.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
            Label::ALL[k].title(),
            m.precision,
            m.recall,
            m.f1,
            m.support
        );
    }
    let total = r.confusion.total();
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<14}{:>10}{:>10}{:>10.2}{:>10}", "accuracy", "", "", r.accuracy, total);
    let _ = writeln!(
        s,
        "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
        "macro avg", r.macro_precision, r.macro_recall, r.macro_f1, total
    );
    let _ = writeln!(
        s,
        "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
        "weighted avg", r.weighted_precision, r.weighted_recall, r.weighted_f1, total
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "kappa {:.4}  auc {}", r.kappa, fmt_auc(r.auc_macro, 4));
    let _ = writeln!(s, "(precision/recall/f1 are 0 where undefined)");
    s
}

pub fn classification_report_csv(r: &EvalReport) -> String {
    let mut s = String::from("class,precision,recall,f1,support\n");
    for (k, m) in r.per_class.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{:.4},{}",
            Label::ALL[k].as_str(),
            m.precision,
            m.recall,
            m.f1,
            m.support
        );
    }
    s
}
