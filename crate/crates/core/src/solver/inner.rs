//! Inner solvers for the block subproblems.

use crate::data_model::Matrix;
use crate::penalty::{prox_block_l21_inplace, row_norm_sum};

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x: Matrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub struct FistaParams {
    /// Penalty weight on the row norms (`lambda * gamma_d`).
    pub lambda: f64,
    pub lipschitz: f64,
    pub initial_step: Option<f64>,
    pub beta: f64,
    pub eps: f64,
    pub max_iters: usize,
}

/// FISTA with backtracking on `smooth(x) + lambda * sum_l ||x_l||`.
///
/// Stops when `||x_{t+1} - x_t||_F^2 / rows < eps`. Returns the iterate with
/// the lowest composite objective seen, the starting point included.
pub fn fista(
    x0: &Matrix,
    smooth: impl Fn(&Matrix) -> f64,
    grad: impl Fn(&Matrix) -> Matrix,
    p: &FistaParams,
) -> InnerResult {
    let rows = x0.nrows().max(1) as f64;
    let composite = |x: &Matrix, fx: f64| {
        if p.lambda > 0.0 {
            fx + p.lambda * row_norm_sum(x)
        } else {
            fx
        }
    };
    let mut step = match p.initial_step {
        Some(s) => s,
        None if p.lipschitz > 0.0 => 1.0 / p.lipschitz,
        None => 1.0,
    };
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut t = 1.0_f64;
    let f0 = smooth(x0);
    let mut best = (x0.clone(), composite(x0, f0));
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=p.max_iters {
        iterations = it;
        let fy = smooth(&y);
        let gy = grad(&y);
        let mut x_next;
        let mut fx_next;
        // backtracking: shrink the step until the quadratic upper bound holds
        loop {
            x_next = &y - &(&gy * step);
            prox_block_l21_inplace(&mut x_next, step * p.lambda);
            fx_next = smooth(&x_next);
            let diff = &x_next - &y;
            let bound = fy + (&gy * &diff).sum() + diff.mapv(|v| v * v).sum() / (2.0 * step);
            if fx_next <= bound + 1e-12 * fy.abs().max(1.0) || step < 1e-300 {
                break;
            }
            step *= p.beta;
        }
        let obj = composite(&x_next, fx_next);
        if obj < best.1 {
            best = (x_next.clone(), obj);
        }
        let change = (&x_next - &x).mapv(|v| v * v).sum() / rows;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_next + &((&x_next - &x) * ((t - 1.0) / t_next));
        x = x_next;
        t = t_next;
        if change < p.eps {
            converged = true;
            break;
        }
    }
    InnerResult {
        x: best.0,
        objective: best.1,
        iterations,
        converged,
    }
}

pub struct AdagradParams {
    pub rate: f64,
    pub eps: f64,
    pub max_iters: usize,
}

/// Adagrad: per-coordinate steps `rate / sqrt(sum of squared gradients)`.
///
/// Stops when the relative change of the objective drops below `eps`.
/// Returns the best iterate seen, the starting point included.
pub fn adagrad(
    x0: &Matrix,
    f: impl Fn(&Matrix) -> f64,
    grad: impl Fn(&Matrix) -> Matrix,
    p: &AdagradParams,
) -> InnerResult {
    const DELTA: f64 = 1e-10;
    let mut x = x0.clone();
    let mut acc = Matrix::zeros(x0.dim());
    let mut f_prev = f(&x);
    let mut best = (x.clone(), f_prev);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=p.max_iters {
        iterations = it;
        let g = grad(&x);
        acc.zip_mut_with(&g, |a, &gv| *a += gv * gv);
        ndarray::Zip::from(&mut x)
            .and(&g)
            .and(&acc)
            .for_each(|xv, &gv, &av| *xv -= p.rate * gv / (av.sqrt() + DELTA));
        let fx = f(&x);
        if fx < best.1 {
            best = (x.clone(), fx);
        }
        let rel = (f_prev - fx).abs() / f_prev.abs().max(f64::MIN_POSITIVE);
        f_prev = fx;
        if rel < p.eps {
            converged = true;
            break;
        }
    }
    InnerResult {
        x: best.0,
        objective: best.1,
        iterations,
        converged,
    }
}
