//! Small dense kernels backed by nalgebra: K x K solves, the symmetric
//! eigenproblem and the thin SVD of the concatenated data.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array1;

use crate::data_model::Matrix;

pub(crate) fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(to_na(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn sym_max_eigenvalue(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sym_eigenvalues(m)[0].max(0.0)
}

/// Outcome of a symmetric positive (semi)definite solve.
#[derive(Debug, Clone)]
pub struct GramSolve {
    pub solution: Matrix,
    /// Ridge actually added to the diagonal (0 when the Gram matrix was well conditioned).
    pub ridge: f64,
}

/// Solves `gram * X = rhs` for symmetric `gram`.
///
/// When `gram` is numerically singular (smallest eigenvalue below `1e-12`
/// times the largest) the fallback ridge is added to the diagonal first; if
/// that is zero a ridge of `1e-10 * trace / K` is used instead.
pub fn solve_gram(gram: &Matrix, rhs: &Matrix, fallback_ridge: f64) -> GramSolve {
    let k = gram.nrows();
    let ev = sym_eigenvalues(gram);
    let (max, min) = (ev[0], ev[k - 1]);
    let mut ridge = 0.0;
    // written so that a NaN maximum also takes the fallback
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(max > 0.0) || min <= 1e-12 * max {
        let tr: f64 = gram.diag().sum();
        ridge = if fallback_ridge > 0.0 {
            fallback_ridge
        } else {
            (1e-10 * tr / k as f64).max(1e-12)
        };
    }
    GramSolve {
        solution: solve_with_ridge(gram, rhs, ridge),
        ridge,
    }
}

/// Solves `(gram + ridge I) X = rhs` by Cholesky, falling back to LU.
pub fn solve_with_ridge(gram: &Matrix, rhs: &Matrix, ridge: f64) -> Matrix {
    let mut a = to_na(gram);
    for i in 0..a.nrows() {
        a[(i, i)] += ridge;
    }
    let b = to_na(rhs);
    if let Some(ch) = a.clone().cholesky() {
        return from_na(&ch.solve(&b));
    }
    match a.lu().solve(&b) {
        Some(x) => from_na(&x),
        None => Matrix::zeros(rhs.dim()),
    }
}

/// Left singular vectors and singular values (descending) of `m`.
///
/// Returns `U` with `min(n, p)` columns.
pub fn thin_svd(m: &Matrix) -> (Matrix, Array1<f64>) {
    let svd = to_na(m).svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let mut uo = Matrix::zeros((u.nrows(), order.len()));
    let mut so = Array1::zeros(order.len());
    for (j, &o) in order.iter().enumerate() {
        so[j] = sv[o];
        for i in 0..u.nrows() {
            uo[[i, j]] = u[(i, o)];
        }
    }
    (uo, so)
}

/// Singular values (descending) of `m`.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    // eigenvalues of the smaller Gram matrix are the squared singular values
    let gram = if m.nrows() <= m.ncols() {
        m.dot(&m.t())
    } else {
        m.t().dot(m)
    };
    sym_eigenvalues(&gram).into_iter().map(|e| e.max(0.0).sqrt()).collect()
}
