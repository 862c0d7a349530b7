//! Row-block (l2,1) penalty on the common and subgroup-specific loadings,
//! and its proximal operator.

use ndarray::{ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data_model::Matrix;
use crate::error::{HipError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda_g: f64,
    pub lambda_xi: f64,
    pub gamma: Vec<bool>,
}

/// Element-wise product of a row of `G^d` and a row of `Xi^{d,s}`.
pub fn compose(g_row: &[f64], xi_row: &[f64]) -> Result<Vec<f64>> {
    if g_row.len() != xi_row.len() {
        return Err(HipError::LengthMismatch {
            expected: g_row.len(),
            got: xi_row.len(),
        });
    }
    Ok(g_row.iter().zip(xi_row).map(|(g, x)| g * x).collect())
}

/// Sum of the Euclidean norms of the rows of `m`.
pub fn row_norm_sum(m: &Matrix) -> f64 {
    m.outer_iter().map(|r| norm(r)).sum()
}

fn norm(r: ArrayView1<f64>) -> f64 {
    r.dot(&r).sqrt()
}

/// `sum_d gamma_d [ lambda_G sum_l ||g_l^d|| + lambda_xi sum_s sum_l ||xi_l^{d,s}|| ]`.
pub fn penalty_value(g: &[Matrix], xi: &[Vec<Matrix>], cfg: &PenaltyConfig) -> Result<f64> {
    if g.len() != xi.len() || g.len() != cfg.gamma.len() {
        return Err(HipError::ShapeMismatch(format!(
            "penalty over {} G, {} Xi views and {} gamma flags",
            g.len(),
            xi.len(),
            cfg.gamma.len()
        )));
    }
    let mut total = 0.0;
    for ((gd, xis), &penalized) in g.iter().zip(xi).zip(&cfg.gamma) {
        if !penalized {
            continue;
        }
        let mut view = 0.0;
        if cfg.lambda_g != 0.0 {
            view += cfg.lambda_g * row_norm_sum(gd);
        }
        if cfg.lambda_xi != 0.0 {
            for x in xis {
                if x.dim() != gd.dim() {
                    return Err(HipError::ShapeMismatch(format!(
                        "Xi block {:?} vs G {:?}",
                        x.dim(),
                        gd.dim()
                    )));
                }
                view += cfg.lambda_xi * row_norm_sum(x);
            }
        }
        total += view;
    }
    Ok(total)
}

/// Proximal operator of `threshold * sum_l ||v_l||_2`: each row is scaled by
/// `max(0, 1 - threshold / ||v_l||)`, rows with norm at or below the
/// threshold become exactly zero.
pub fn prox_block_l21(v: &Matrix, threshold: f64) -> Matrix {
    let mut out = v.clone();
    prox_block_l21_inplace(&mut out, threshold);
    out
}

pub fn prox_block_l21_inplace(v: &mut Matrix, threshold: f64) {
    debug_assert!(threshold >= 0.0);
    if threshold == 0.0 {
        return;
    }
    for mut row in v.axis_iter_mut(Axis(0)) {
        let n = norm(row.view());
        if n <= threshold {
            row.fill(0.0);
        } else {
            let f = 1.0 - threshold / n;
            row.mapv_inplace(|x| x * f);
        }
    }
}

/// Row indices with at least one entry of magnitude above `zero_tol`.
pub fn support(b: &Matrix, zero_tol: f64) -> Vec<usize> {
    b.outer_iter()
        .enumerate()
        .filter(|(_, r)| r.iter().any(|v| v.abs() > zero_tol))
        .map(|(l, _)| l)
        .collect()
}
