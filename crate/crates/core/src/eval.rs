//! Per-class tallies and micro/macro F-scores.
//!
//! Micro scores are computed from globally summed true positives, false
//! positives, and false negatives; the macro F-score is the unweighted
//! mean of per-class F over all encoded classes, counting classes with no
//! instances and no predictions as F = 0. Any precision, recall, or F
//! with a zero denominator is defined as 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class true positive / false positive / false negative counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionTally {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
    pub n_instances: usize,
}

impl ConfusionTally {
    pub fn n_classes(&self) -> usize {
        self.tp.len()
    }
}

/// Counts TP/FP/FN per class over paired gold and predicted class ids.
pub fn tally(gold: &[usize], pred: &[usize], n_classes: usize) -> Result<ConfusionTally> {
    if gold.len() != pred.len() {
        return Err(Error::Dimension(format!(
            "gold has {} entries, pred has {}",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Validation("tally over zero instances".into()));
    }
    let mut t = ConfusionTally {
        tp: vec![0; n_classes],
        fp: vec![0; n_classes],
        fn_: vec![0; n_classes],
        n_instances: gold.len(),
    };
    for (&g, &p) in gold.iter().zip(pred) {
        if g >= n_classes || p >= n_classes {
            return Err(Error::Validation(format!(
                "class id out of range: gold {g}, pred {p}, n_classes {n_classes}"
            )));
        }
        if g == p {
            t.tp[g] += 1;
        } else {
            t.fp[p] += 1;
            t.fn_[g] += 1;
        }
    }
    Ok(t)
}

/// Harmonic mean of precision and recall; equal operands return the
/// operand itself so the single-label micro-F/accuracy identity holds
/// exactly in floating point.
fn f_score(p: f64, r: f64) -> f64 {
    if p == r {
        p
    } else if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn micro_precision(t: &ConfusionTally) -> f64 {
    let tp: usize = t.tp.iter().sum();
    let fp: usize = t.fp.iter().sum();
    ratio(tp, tp + fp)
}

pub fn micro_recall(t: &ConfusionTally) -> f64 {
    let tp: usize = t.tp.iter().sum();
    let fn_: usize = t.fn_.iter().sum();
    ratio(tp, tp + fn_)
}

/// Micro F-score over globally summed tallies.
pub fn micro_f(t: &ConfusionTally) -> f64 {
    f_score(micro_precision(t), micro_recall(t))
}

pub fn class_precision(t: &ConfusionTally, class: usize) -> f64 {
    ratio(t.tp[class], t.tp[class] + t.fp[class])
}

pub fn class_recall(t: &ConfusionTally, class: usize) -> f64 {
    ratio(t.tp[class], t.tp[class] + t.fn_[class])
}

pub fn class_f(t: &ConfusionTally, class: usize) -> f64 {
    f_score(class_precision(t, class), class_recall(t, class))
}

/// Unweighted mean of per-class F over all encoded classes.
pub fn macro_f(t: &ConfusionTally) -> f64 {
    let k = t.n_classes();
    if k == 0 {
        return 0.0;
    }
    (0..k).map(|j| class_f(t, j)).sum::<f64>() / k as f64
}

/// Macro F restricted to classes with at least one gold instance.
pub fn macro_f_present_only(t: &ConfusionTally) -> f64 {
    let present: Vec<usize> = (0..t.n_classes())
        .filter(|&j| t.tp[j] + t.fn_[j] > 0)
        .collect();
    if present.is_empty() {
        return 0.0;
    }
    present.iter().map(|&j| class_f(t, j)).sum::<f64>() / present.len() as f64
}

/// Per-class precision/recall/F row of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub support: usize,
}

/// Summary metrics plus the per-class table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f: f64,
    pub macro_f: f64,
    /// Macro F over classes that appear in the gold labels.
    pub macro_f_present: f64,
    pub n_instances: usize,
    pub per_class: Vec<ClassMetrics>,
}

impl EvalReport {
    /// Builds a report from a tally; `labels` supplies class names in
    /// encoding order.
    pub fn from_tally(t: &ConfusionTally, labels: &[String]) -> Result<Self> {
        if labels.len() != t.n_classes() {
            return Err(Error::Dimension(format!(
                "{} labels for {} classes",
                labels.len(),
                t.n_classes()
            )));
        }
        let per_class = labels
            .iter()
            .enumerate()
            .map(|(j, label)| ClassMetrics {
                label: label.clone(),
                precision: class_precision(t, j),
                recall: class_recall(t, j),
                f: class_f(t, j),
                support: t.tp[j] + t.fn_[j],
            })
            .collect();
        Ok(EvalReport {
            micro_precision: micro_precision(t),
            micro_recall: micro_recall(t),
            micro_f: micro_f(t),
            macro_f: macro_f(t),
            macro_f_present: macro_f_present_only(t),
            n_instances: t.n_instances,
            per_class,
        })
    }

    /// Key/value metrics followed by an aligned per-class table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instances       {}", self.n_instances);
        let _ = writeln!(s, "micro_precision {:.6}", self.micro_precision);
        let _ = writeln!(s, "micro_recall    {:.6}", self.micro_recall);
        let _ = writeln!(s, "micro_f         {:.6}", self.micro_f);
        let _ = writeln!(s, "macro_f         {:.6}", self.macro_f);
        let _ = writeln!(s, "macro_f_present {:.6}", self.macro_f_present);
        let width = self
            .per_class
            .iter()
            .map(|c| c.label.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            "class", "precision", "recall", "f", "support"
        );
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
                c.label, c.precision, c.recall, c.f, c.support
            );
        }
        s
    }
}
