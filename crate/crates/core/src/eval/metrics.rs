use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 with every zero denominator mapped to 0.
pub fn pr_f1(tp: usize, fp: usize, fn_: usize) -> Prf {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Prf { precision, recall, f1 }
}

/// 101-point interpolated average precision.
///
/// `ranked` holds one true-positive flag per prediction, highest confidence
/// first. Interpolated precision at recall `r` is the best precision reached at
/// any recall of at least `r` (0 when `r` is never reached). Returns `None`
/// when the category is not in play (no ground truths and no predictions) and
/// 0 when there are predictions but no ground truths.
pub fn ap_101(ranked: &[bool], n_gt: usize) -> Result<Option<f64>> {
    let tp_total = ranked.iter().filter(|&&f| f).count();
    if tp_total > n_gt {
        return Err(Error::InconsistentFlags { tp: tp_total, n_gt });
    }
    if n_gt == 0 {
        return Ok(if ranked.is_empty() { None } else { Some(0.0) });
    }
    let mut tp = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(ranked.len());
    for (k, &hit) in ranked.iter().enumerate() {
        tp += hit as usize;
        curve.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // Running maximum from the tail makes precision non-increasing in recall.
    for i in (0..curve.len().saturating_sub(1)).rev() {
        curve[i].1 = curve[i].1.max(curve[i + 1].1);
    }
    let mut sum = 0.0;
    let mut j = 0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        while j < curve.len() && curve[j].0 < r {
            j += 1;
        }
        if j < curve.len() {
            sum += curve[j].1;
        }
    }
    Ok(Some(sum / 101.0))
}
