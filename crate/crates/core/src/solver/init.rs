use ndarray::s;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data_model::{FactorModel, Hyperparameters, Matrix, MultiViewDataset, Outcome, Standardizer};
use crate::error::{HipError, Result};
use crate::linalg::{solve_gram, thin_svd};

/// Starting point of the alternating scheme.
///
/// Scores come from the first `K` left singular vectors of the `N x sum(p_d)`
/// concatenated data, split by subgroup in order; all `G^d` and `Xi^{d,s}`
/// start at one. A continuous `Theta` is the regression of the outcome on
/// those singular vectors, a multiclass one is drawn from `U(0, 1)`; either
/// way its columns are scaled to unit length.
pub fn initialize(data: &MultiViewDataset, hyper: &Hyperparameters, seed: u64) -> Result<FactorModel> {
    let k = hyper.k;
    let sizes = data.subgroup_sizes();
    let min_n = *sizes.iter().min().expect("at least one subgroup");
    let total_p: usize = data.view_sizes().iter().sum();
    if k == 0 || k > min_n || k > total_p {
        return Err(HipError::InvalidInput(format!(
            "K = {k} must lie in 1..=min(smallest subgroup {min_n}, total variables {total_p})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diagnostics = Vec::new();

    let cat = data.concatenated();
    let n = cat.nrows();
    let (u, sv) = thin_svd(&cat);
    let tol = sv.first().copied().unwrap_or(0.0) * 1e-12 * (n.max(total_p) as f64);
    let rank = sv.iter().filter(|&&v| v > tol).count();
    let mut uk = Matrix::zeros((n, k));
    let take = rank.min(k);
    uk.slice_mut(s![.., ..take]).assign(&u.slice(s![.., ..take]));
    if take < k {
        let msg = format!("concatenated data has rank {rank} < K = {k}; padded scores with small noise");
        log::warn!("{msg}");
        diagnostics.push(msg);
        let sd = 1e-3 / (n as f64).sqrt();
        for j in take..k {
            for i in 0..n {
                uk[[i, j]] = sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    let mut z = Vec::with_capacity(sizes.len());
    let mut row = 0;
    for &ns in &sizes {
        z.push(uk.slice(s![row..row + ns, ..]).to_owned());
        row += ns;
    }

    let mut theta = match &data.outcome {
        Outcome::Continuous { y, .. } => {
            let q = y[0].ncols();
            let mut stacked = Matrix::zeros((n, q));
            let mut row = 0;
            for ys in y {
                stacked.slice_mut(s![row..row + ys.nrows(), ..]).assign(ys);
                row += ys.nrows();
            }
            solve_gram(&uk.t().dot(&uk), &uk.t().dot(&stacked), 0.0).solution
        }
        Outcome::MultiClass { y } => {
            let m = y[0].ncols();
            Matrix::from_shape_fn((k, m), |_| rng.random::<f64>())
        }
    };
    for mut col in theta.columns_mut() {
        let nrm = col.dot(&col).sqrt();
        if nrm > 0.0 {
            col.mapv_inplace(|v| v / nrm);
        }
    }

    let g: Vec<Matrix> = data.view_sizes().iter().map(|&p| Matrix::ones((p, k))).collect();
    let xi = g.iter().map(|gd| vec![gd.clone(); sizes.len()]).collect();
    let mut model = FactorModel::new(
        g,
        xi,
        z,
        theta,
        data.outcome.kind(),
        hyper.clone(),
        Standardizer::identity(),
    )?;
    model.diagnostics = diagnostics;
    Ok(model)
}
