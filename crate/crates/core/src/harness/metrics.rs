//! Count-based precision, recall and F1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Class-count tallies summed over classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatch {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Per class: TP = min(pred, gt), FP = excess predictions, FN = shortfall.
pub fn count_matches(pred: &BTreeMap<usize, usize>, gt: &BTreeMap<usize, usize>) -> CountMatch {
    let mut m = CountMatch::default();
    let classes: BTreeSet<usize> = pred.keys().chain(gt.keys()).copied().collect();
    for class in &classes {
        let p = pred.get(class).copied().unwrap_or(0);
        let g = gt.get(class).copied().unwrap_or(0);
        m.tp += p.min(g);
        m.fp += p.saturating_sub(g);
        m.fn_ += g.saturating_sub(p);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a ratio had a zero denominator and was defined as 0.
    pub degenerate: bool,
}

pub fn metrics(m: &CountMatch) -> Metrics {
    let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
    let p = ratio(m.tp, m.tp + m.fp);
    let r = ratio(m.tp, m.tp + m.fn_);
    let precision = p.unwrap_or(0.0);
    let recall = r.unwrap_or(0.0);
    Metrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        degenerate: p.is_none() || r.is_none(),
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}
