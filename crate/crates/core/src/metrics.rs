//! Variable-selection and prediction scores.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data_model::Matrix;
use crate::error::{HipError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub tpr: f64,
    pub fpr: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// TPR, FPR and F1 of `selected` against `truth` among `p` variables.
///
/// Empty denominators follow the vacuous-success convention: TPR is 1 when
/// the truth is empty, FPR is 0 when every variable is true, and F1 is 1
/// when there are no true positives, false positives or false negatives.
pub fn score_selection(selected: &[usize], truth: &[usize], p: usize) -> Result<SelectionScore> {
    let sel: BTreeSet<usize> = selected.iter().copied().collect();
    let tru: BTreeSet<usize> = truth.iter().copied().collect();
    if let Some(&bad) = sel.iter().chain(&tru).find(|&&i| i >= p) {
        return Err(HipError::InvalidInput(format!("index {bad} out of range for {p} variables")));
    }
    let tp = sel.intersection(&tru).count();
    let fp = sel.len() - tp;
    let fn_ = tru.len() - tp;
    let tn = p - tp - fp - fn_;
    let tpr = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let fpr = if fp + tn == 0 { 0.0 } else { fp as f64 / (fp + tn) as f64 };
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp as f64 + 0.5 * (fp + fn_) as f64)
    };
    Ok(SelectionScore { tpr, fpr, f1, tp, fp, tn, fn_ })
}

/// Mean squared element-wise difference.
pub fn test_mse(pred: &Matrix, obs: &Matrix) -> Result<f64> {
    if pred.dim() != obs.dim() {
        return Err(HipError::ShapeMismatch(format!(
            "prediction {:?} vs observation {:?}",
            pred.dim(),
            obs.dim()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok((pred - obs).mapv(|v| v * v).sum() / pred.len() as f64)
}

/// Fraction of exact label matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(HipError::LengthMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}
