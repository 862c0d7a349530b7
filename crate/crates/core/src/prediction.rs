//! Out-of-sample scores and outcome predictions from a fitted model.

use crate::data_model::{argmax_rows, FactorModel, Matrix, MultiViewDataset, OutcomeKind};
use crate::error::{HipError, Result};
use crate::linalg::{solve_gram, solve_with_ridge};
use crate::solver::softmax_rows;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictedOutcome {
    Continuous {
        /// `Z_pred Theta`, on the fit-time outcome scale.
        standardized: Vec<Matrix>,
        /// Mapped back through the fit-time outcome standardization.
        original: Vec<Matrix>,
    },
    MultiClass {
        probabilities: Vec<Matrix>,
        labels: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub z: Vec<Matrix>,
    pub outcome: PredictedOutcome,
}

/// Scores for new data: per subgroup,
/// `Z = X_cat B_cat (B_cat^T B_cat + ridge I)^{-1}`.
///
/// The model's standardizer is applied to `test` first.
pub fn predict_scores(model: &FactorModel, test: &MultiViewDataset) -> Result<Vec<Matrix>> {
    let views = model.standardizer.apply_views(&test.views)?;
    predict_scores_scaled(model, &views)
}

/// As [`predict_scores`] for views already on the fitted scale.
pub fn predict_scores_scaled(model: &FactorModel, views: &[Vec<Matrix>]) -> Result<Vec<Matrix>> {
    if views.len() != model.n_views() {
        return Err(HipError::ShapeMismatch(format!(
            "test data has {} views, model has {}",
            views.len(),
            model.n_views()
        )));
    }
    let sizes = model.view_sizes();
    for (d, blocks) in views.iter().enumerate() {
        if blocks.len() != model.n_subgroups() {
            return Err(HipError::ShapeMismatch(format!(
                "test view {d} has {} subgroups, model has {}",
                blocks.len(),
                model.n_subgroups()
            )));
        }
        for m in blocks {
            if m.ncols() != sizes[d] {
                return Err(HipError::ShapeMismatch(format!(
                    "test view {d} has {} columns, model has {}",
                    m.ncols(),
                    sizes[d]
                )));
            }
        }
    }
    let k = model.k();
    (0..model.n_subgroups())
        .map(|s| {
            let n = views[0][s].nrows();
            let mut xb = Matrix::zeros((n, k));
            let mut gram = Matrix::zeros((k, k));
            for (d, blocks) in views.iter().enumerate() {
                if blocks[s].nrows() != n {
                    return Err(HipError::ShapeMismatch(format!(
                        "test views disagree on the size of subgroup {s}"
                    )));
                }
                let b = model.b(d, s);
                xb += &blocks[s].dot(b);
                gram += &b.t().dot(b);
            }
            let trace = gram.diag().sum();
            if trace == 0.0 {
                log::warn!("all loadings of subgroup {s} are zero; predicted scores set to zero");
                return Ok(Matrix::zeros((n, k)));
            }
            let ridge = model.hyper.ridge.resolve(trace, k);
            let rhs = xb.t().to_owned();
            let sol = if ridge > 0.0 {
                solve_with_ridge(&gram, &rhs, ridge)
            } else {
                solve_gram(&gram, &rhs, 0.0).solution
            };
            Ok(sol.t().to_owned())
        })
        .collect()
}

/// Outcome predictions from scores: `Z Theta` for a continuous outcome,
/// softmax probabilities and argmax labels (lowest index on ties) otherwise.
pub fn predict_outcome(model: &FactorModel, z_pred: Vec<Matrix>) -> Result<PredictionResult> {
    for z in &z_pred {
        if z.ncols() != model.k() {
            return Err(HipError::ShapeMismatch(format!(
                "scores have {} columns, K = {}",
                z.ncols(),
                model.k()
            )));
        }
    }
    let w: Vec<Matrix> = z_pred.iter().map(|z| z.dot(&model.theta)).collect();
    let outcome = match model.outcome_kind {
        OutcomeKind::Continuous => {
            let original = w
                .iter()
                .enumerate()
                .map(|(s, y)| model.standardizer.destandardize_outcome(s, y))
                .collect();
            PredictedOutcome::Continuous {
                standardized: w,
                original,
            }
        }
        OutcomeKind::Multiclass => {
            let probabilities: Vec<Matrix> = w.iter().map(softmax_rows).collect();
            let labels = probabilities.iter().map(argmax_rows).collect();
            PredictedOutcome::MultiClass { probabilities, labels }
        }
    };
    Ok(PredictionResult { z: z_pred, outcome })
}

pub fn predict(model: &FactorModel, test: &MultiViewDataset) -> Result<PredictionResult> {
    let z = predict_scores(model, test)?;
    predict_outcome(model, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Hyperparameters, Ridge, Standardizer};
    use ndarray::array;

    fn model_with(b: Matrix, theta: Matrix, kind: OutcomeKind, ridge: Ridge) -> FactorModel {
        let k = b.ncols();
        let xi = vec![vec![Matrix::ones(b.dim())]];
        FactorModel::new(
            vec![b],
            xi,
            vec![Matrix::zeros((1, k))],
            theta,
            kind,
            Hyperparameters {
                ridge,
                k,
                ..Default::default()
            },
            Standardizer::identity(),
        )
        .unwrap()
    }

    #[test]
    fn orthonormal_loadings_project() {
        let b = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let m = model_with(b.clone(), Matrix::zeros((2, 1)), OutcomeKind::Continuous, Ridge::Absolute(0.0));
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]];
        let z = predict_scores_scaled(&m, &[vec![x.clone()]]).unwrap();
        assert!((&z[0] - &x.dot(&b)).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_component_ridge_scaling() {
        let b = array![[1.0], [0.0], [0.0]];
        let m = model_with(b, Matrix::zeros((1, 1)), OutcomeKind::Continuous, Ridge::Absolute(0.25));
        let x = array![[2.0, 7.0, 1.0]];
        let z = predict_scores_scaled(&m, &[vec![x]]).unwrap();
        assert!((z[0][[0, 0]] - 2.0 / 1.25).abs() < 1e-12);
    }

    #[test]
    fn zero_loadings_give_zero_scores() {
        let m = model_with(Matrix::zeros((3, 2)), Matrix::zeros((2, 1)), OutcomeKind::Continuous, Ridge::default());
        let z = predict_scores_scaled(&m, &[vec![array![[1.0, 2.0, 3.0]]]]).unwrap();
        assert!(z[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_wrong_width() {
        let m = model_with(Matrix::ones((3, 1)), Matrix::zeros((1, 1)), OutcomeKind::Continuous, Ridge::default());
        assert!(predict_scores_scaled(&m, &[vec![array![[1.0, 2.0]]]]).is_err());
    }

    #[test]
    fn zero_theta_multiclass_is_uniform() {
        let m = model_with(Matrix::ones((2, 2)), Matrix::zeros((2, 3)), OutcomeKind::Multiclass, Ridge::default());
        let r = predict_outcome(&m, vec![array![[1.0, -4.0], [100.0, 3.0]]]).unwrap();
        match r.outcome {
            PredictedOutcome::MultiClass { probabilities, labels } => {
                assert!(probabilities[0].iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
                assert_eq!(labels[0], vec![0, 0]);
            }
            _ => panic!("expected multiclass"),
        }
    }

    #[test]
    fn continuous_prediction_is_z_theta() {
        let m = model_with(Matrix::ones((2, 2)), array![[1.0], [0.0]], OutcomeKind::Continuous, Ridge::default());
        let r = predict_outcome(&m, vec![array![[3.2, -7.0]]]).unwrap();
        match r.outcome {
            PredictedOutcome::Continuous { standardized, .. } => assert_eq!(standardized[0][[0, 0]], 3.2),
            _ => panic!("expected continuous"),
        }
    }
}
