//! Row-wise softmax and multinomial cross-entropy.

use ndarray::Zip;

use crate::data_model::Matrix;

/// Row-wise softmax of the score matrix `W = Z Theta`, shifted by the row
/// maximum so that large scores stay finite.
pub fn softmax_rows(w: &Matrix) -> Matrix {
    let mut a = w.clone();
    for mut row in a.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    a
}

/// `-sum_ij y_ij log softmax(w)_ij` evaluated through log-sum-exp.
pub fn cross_entropy(y: &Matrix, w: &Matrix) -> f64 {
    let mut total = 0.0;
    for (yr, wr) in y.rows().into_iter().zip(w.rows()) {
        let max = wr.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + wr.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let mut row = 0.0;
        Zip::from(&yr).and(&wr).for_each(|&yv, &wv| {
            if yv != 0.0 {
                row += yv * (lse - wv);
            }
        });
        total += row;
    }
    total
}

/// Softmax probabilities and the cross-entropy gradient `A - Y` with respect to the scores.
pub fn cross_entropy_grad(y: &Matrix, w: &Matrix) -> (Matrix, Matrix) {
    let a = softmax_rows(w);
    let g = &a - y;
    (a, g)
}
