//! Set-based scoring of predicted facts against `(T, F)` ground truth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Atom;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub f1: f64,
    pub positive_accuracy: f64,
    pub negative_accuracy: f64,
    pub total_accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio_or(num: usize, den: usize, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

impl EvalResult {
    /// Metrics from raw counts. Empty denominators give 0 for F1 and 1 for
    /// the accuracy ratios.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        EvalResult {
            f1: ratio_or(2 * tp, 2 * tp + fp + fn_, 0.0),
            positive_accuracy: ratio_or(tp, tp + fn_, 1.0),
            negative_accuracy: ratio_or(tn, tn + fp, 1.0),
            total_accuracy: ratio_or(tp + tn, tp + fp + fn_ + tn, 1.0),
            tp,
            fp,
            fn_,
            tn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Micro,
    Macro,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "micro" => Ok(Aggregation::Micro),
            "macro" => Ok(Aggregation::Macro),
            other => Err(format!("unknown aggregation {other:?} (micro|macro)")),
        }
    }
}

/// Scores one example under the local closed-world reading: predictions
/// outside `T ∪ F` are ignored.
pub fn evaluate_example(
    predicted: &BTreeSet<Atom>,
    truth_t: &BTreeSet<Atom>,
    truth_f: &BTreeSet<Atom>,
) -> EvalResult {
    let (tp, fp, fn_, tn) = counts(predicted, truth_t, truth_f);
    EvalResult::from_counts(tp, fp, fn_, tn)
}

/// Like [`evaluate_example`], but every prediction outside `T` also counts
/// as a false positive.
pub fn evaluate_example_strict(
    predicted: &BTreeSet<Atom>,
    truth_t: &BTreeSet<Atom>,
    truth_f: &BTreeSet<Atom>,
) -> EvalResult {
    let (tp, fp, fn_, tn) = counts(predicted, truth_t, truth_f);
    let known_false: BTreeSet<Atom> = truth_f.iter().map(|f| f.clone().with_polarity(false)).collect();
    let unlabeled = predicted
        .iter()
        .filter(|p| !truth_t.contains(*p) && !known_false.contains(*p))
        .count();
    EvalResult::from_counts(tp, fp + unlabeled, fn_, tn)
}

fn counts(
    predicted: &BTreeSet<Atom>,
    truth_t: &BTreeSet<Atom>,
    truth_f: &BTreeSet<Atom>,
) -> (usize, usize, usize, usize) {
    let tp = truth_t.iter().filter(|t| predicted.contains(*t)).count();
    let fn_ = truth_t.len() - tp;
    let fp = truth_f
        .iter()
        .filter(|f| predicted.contains(&(*f).clone().with_polarity(false)))
        .count();
    let tn = truth_f.len() - fp;
    (tp, fp, fn_, tn)
}

/// Micro sums the counts; macro averages per-example metrics (counts are
/// still summed).
pub fn evaluate_corpus(results: &[EvalResult], mode: Aggregation) -> Result<EvalResult> {
    if results.is_empty() {
        return Err(Error::Invalid("cannot aggregate an empty corpus".into()));
    }
    let sum = |f: fn(&EvalResult) -> usize| results.iter().map(f).sum::<usize>();
    let (tp, fp, fn_, tn) = (sum(|r| r.tp), sum(|r| r.fp), sum(|r| r.fn_), sum(|r| r.tn));
    Ok(match mode {
        Aggregation::Micro => EvalResult::from_counts(tp, fp, fn_, tn),
        Aggregation::Macro => {
            let n = results.len() as f64;
            let mean = |f: fn(&EvalResult) -> f64| results.iter().map(f).sum::<f64>() / n;
            EvalResult {
                f1: mean(|r| r.f1),
                positive_accuracy: mean(|r| r.positive_accuracy),
                negative_accuracy: mean(|r| r.negative_accuracy),
                total_accuracy: mean(|r| r.total_accuracy),
                tp,
                fp,
                fn_,
                tn,
            }
        }
    })
}

/// Micro-aggregated metrics at each threshold, from per-example lists of
/// `(probability, is_true_fact)` pairs over `T ∪ F`. A pair is predicted
/// when its probability is strictly above the threshold.
pub fn threshold_sweep(examples: &[Vec<(f64, bool)>], thresholds: &[f64]) -> Vec<(f64, EvalResult)> {
    thresholds
        .iter()
        .map(|&th| {
            let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
            for &(p, truth) in examples.iter().flatten() {
                match (p > th, truth) {
                    (true, true) => tp += 1,
                    (false, true) => fn_ += 1,
                    (true, false) => fp += 1,
                    (false, false) => tn += 1,
                }
            }
            (th, EvalResult::from_counts(tp, fp, fn_, tn))
        })
        .collect()
}

/// Plain-text table with percentage columns.
pub fn report_table(result: &EvalResult) -> String {
    let header = ["F1-score", "Positive Accuracy", "Negative Accuracy", "Total Accuracy"];
    let values = [
        result.f1,
        result.positive_accuracy,
        result.negative_accuracy,
        result.total_accuracy,
    ];
    let mut out = String::new();
    out.push_str(&header.map(|h| format!("{h:>18}")).join(" "));
    out.push('\n');
    out.push_str(&values.map(|v| format!("{:>18.2}", v * 100.0)).join(" "));
    out.push('\n');
    out
}
