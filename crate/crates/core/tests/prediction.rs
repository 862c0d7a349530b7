mod common;

use common::{noiseless, random_dataset};
use hip::prediction::{predict, predict_scores, predict_scores_scaled, PredictedOutcome};
use hip::{fit, FitOptions, Matrix, Ridge};

fn exact_opts() -> FitOptions {
    let mut opts = FitOptions::default();
    opts.standardize_x = false;
    opts.hyper.ridge = Ridge::Absolute(0.0);
    opts.hyper.eps_outer = 1e-12;
    opts.hyper.eps_inner = 1e-14;
    opts.hyper.max_outer_iters = 12000;
    opts.hyper.max_inner_iters = 5000;
    opts
}

#[test]
fn noiseless_prediction_reproduces_fitted_scores() {
    for seed in 0..3 {
        let nl = noiseless(20 + seed, &[40, 45], &[10, 12], 2);
        let model = fit(&nl.data, &exact_opts()).unwrap();
        let z = predict_scores(&model, &nl.data).unwrap();
        for s in 0..2 {
            let err = (&z[s] - &model.z[s]).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-6, "seed {seed} subgroup {s}: {err}");
        }
        match predict(&model, &nl.data).unwrap().outcome {
            PredictedOutcome::Continuous { original, .. } => {
                for s in 0..2 {
                    let mse = hip::metrics::test_mse(&original[s], &nl.data.outcome.matrices()[s]).unwrap();
                    assert!(mse <= 1e-6, "seed {seed}: mse {mse}");
                }
            }
            _ => panic!("continuous outcome expected"),
        }
    }
}

#[test]
fn residuals_are_orthogonal_to_the_loadings() {
    for seed in 0..5 {
        let data = random_dataset(seed, &[30, 35], &[8, 10], 3, false, 0.5);
        let mut opts = FitOptions::default().with_lambdas(0.2, 0.1).with_k(3);
        opts.hyper.ridge = Ridge::Absolute(0.0);
        let model = fit(&data, &opts).unwrap();
        let views = model.standardizer.apply_views(&data.views).unwrap();
        let z = predict_scores_scaled(&model, &views).unwrap();
        for s in 0..2 {
            let mut worst = 0.0_f64;
            let mut g = Matrix::zeros((30 + 5 * s, 3));
            for d in 0..2 {
                let b = model.b(d, s);
                let r = &views[d][s] - &z[s].dot(&b.t());
                g += &r.dot(b);
            }
            for v in g.iter() {
                worst = worst.max(v.abs());
            }
            assert!(worst <= 1e-8, "seed {seed} subgroup {s}: {worst}");
        }
    }
}

#[test]
fn multiclass_predictions_are_distributions() {
    let data = random_dataset(4, &[30, 35], &[8, 10], 2, true, 0.5);
    let model = fit(&data, &FitOptions::default().with_lambdas(0.3, 0.3)).unwrap();
    match predict(&model, &data).unwrap().outcome {
        PredictedOutcome::MultiClass { probabilities, labels } => {
            for (p, l) in probabilities.iter().zip(&labels) {
                for (i, row) in p.rows().into_iter().enumerate() {
                    assert!((row.sum() - 1.0).abs() < 1e-12);
                    let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(row[l[i]], best);
                }
            }
        }
        _ => panic!("multiclass outcome expected"),
    }
}
