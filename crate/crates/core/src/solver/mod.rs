//! Block-coordinate fitting of the joint factorization.
//!
//! Each outer iteration updates, in order, every `Xi^{d,s}`, every `G^d`,
//! every `Z^s` and finally `Theta`, holding the other blocks fixed. The loop
//! stops once the relative change of the unpenalized objective falls below
//! `eps_outer`.

mod blocks;
mod init;
mod inner;
mod softmax;

use serde::{Deserialize, Serialize};

pub use blocks::{
    g_gradient, g_loss, theta_multiclass_gradient, theta_multiclass_loss, update_g, update_theta,
    update_xi, update_z, xi_gradient, xi_loss, z_multiclass_gradient, z_multiclass_loss,
    BlockQuadratic, BlockUpdate,
};
pub use init::initialize;
pub use inner::{adagrad, fista, AdagradParams, FistaParams, InnerResult};
pub use softmax::{cross_entropy, cross_entropy_grad, softmax_rows};

use crate::data_model::{
    standardize, FactorModel, FitStatus, Hyperparameters, LossRecord, Matrix, MultiViewDataset, Outcome,
    Standardizer,
};
use crate::error::Result;
use crate::penalty::{penalty_value, PenaltyConfig};

/// Relative rise of the unpenalized objective that halts a fit.
const DIVERGENCE_RATIO: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// Step shrink factor, in `(0, 1)`.
    pub beta: f64,
    /// Overrides the `1 / L0` starting step.
    pub initial_step: Option<f64>,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            beta: 0.5,
            initial_step: None,
        }
    }
}

/// Optimizer for loading blocks of unpenalized views (`gamma_d = 0`).
/// Penalized views always use proximal FISTA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerOptimizer {
    FistaProx,
    AdaptiveGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub hyper: Hyperparameters,
    pub line_search: LineSearch,
    pub inner_optimizer: InnerOptimizer,
    /// Base rate of the Adagrad updates.
    pub adagrad_rate: f64,
    /// Seeds the multiclass `Theta` start and any rank-deficiency padding.
    pub seed: u64,
    /// Standardize each view column within each subgroup before fitting.
    pub standardize_x: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            hyper: Hyperparameters::default(),
            line_search: LineSearch::default(),
            inner_optimizer: InnerOptimizer::AdaptiveGradient,
            adagrad_rate: 0.1,
            seed: 0,
            standardize_x: true,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if !(self.line_search.beta > 0.0 && self.line_search.beta < 1.0) {
            return Err(crate::HipError::InvalidInput(format!(
                "line-search factor must lie in (0, 1), got {}",
                self.line_search.beta
            )));
        }
        if let Some(s) = self.line_search.initial_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(crate::HipError::InvalidInput("initial step must be positive".into()));
            }
        }
        if !(self.adagrad_rate > 0.0 && self.adagrad_rate.is_finite()) {
            return Err(crate::HipError::InvalidInput("adagrad rate must be positive".into()));
        }
        Ok(())
    }

    pub fn with_lambdas(&self, lambda_g: f64, lambda_xi: f64) -> Self {
        let mut o = self.clone();
        o.hyper.lambda_g = lambda_g;
        o.hyper.lambda_xi = lambda_xi;
        o
    }

    pub fn with_k(&self, k: usize) -> Self {
        let mut o = self.clone();
        o.hyper.k = k;
        o
    }

    pub fn penalty_config(&self, data: &MultiViewDataset) -> PenaltyConfig {
        PenaltyConfig {
            lambda_g: self.hyper.lambda_g,
            lambda_xi: self.hyper.lambda_xi,
            gamma: data.gamma.clone(),
        }
    }
}

/// `F(Y^s, Z^s, Theta)`: squared error or cross-entropy.
pub fn outcome_loss(y: &Matrix, z: &Matrix, theta: &Matrix, outcome: &Outcome) -> f64 {
    let w = z.dot(theta);
    match outcome {
        Outcome::Continuous { .. } => (y - &w).mapv(|v| v * v).sum(),
        Outcome::MultiClass { .. } => cross_entropy(y, &w),
    }
}

/// Sum of the outcome losses and reconstruction losses over all blocks.
pub fn unpenalized_objective(model: &FactorModel, data: &MultiViewDataset) -> f64 {
    let mut total = 0.0;
    for (s, z) in model.z.iter().enumerate() {
        total += outcome_loss(&data.outcome.matrices()[s], z, &model.theta, &data.outcome);
        for d in 0..model.n_views() {
            let r = &data.views[d][s] - &z.dot(&model.b(d, s).t());
            total += r.iter().map(|v| v * v).sum::<f64>();
        }
    }
    total
}

/// `(unpenalized, penalized)` objective of `model` on `data`, which must be on
/// the scale the model was fitted on.
pub fn objective(model: &FactorModel, data: &MultiViewDataset) -> (f64, f64) {
    let unpen = unpenalized_objective(model, data);
    let cfg = PenaltyConfig {
        lambda_g: model.hyper.lambda_g,
        lambda_xi: model.hyper.lambda_xi,
        gamma: data.gamma.clone(),
    };
    let pen = penalty_value(model.g_all(), model.xi_all(), &cfg).expect("model and data shapes agree");
    (unpen, unpen + pen)
}

/// Standardizes `data` as configured, then fits from the default initialization.
///
/// The returned model carries the standardizer, so prediction applies the
/// same transform to new data.
pub fn fit(data: &MultiViewDataset, opts: &FitOptions) -> Result<FactorModel> {
    let (scaled, st) = prepare(data, opts.standardize_x);
    let init = initialize(&scaled, &opts.hyper, opts.seed)?;
    fit_from(init, &scaled, opts, st)
}

/// Applies the fit-time standardization: a continuous outcome always, views when requested.
pub fn prepare(data: &MultiViewDataset, standardize_x: bool) -> (MultiViewDataset, Standardizer) {
    match &data.outcome {
        Outcome::Continuous { standardized: true, .. } if !standardize_x => {
            (data.clone(), Standardizer::identity())
        }
        _ => standardize(data, standardize_x),
    }
}

/// Runs the alternating scheme from `model` on already-prepared data.
pub fn fit_from(
    mut model: FactorModel,
    data: &MultiViewDataset,
    opts: &FitOptions,
    standardizer: Standardizer,
) -> Result<FactorModel> {
    opts.validate()?;
    data.validate()?;
    model.hyper = opts.hyper.clone();
    model.standardizer = standardizer;
    model.trace.records.clear();
    model.inner_nonconverged = 0;

    let (mut prev_unpen, _) = objective(&model, data);
    let mut best: Option<(f64, FactorModel)> = None;
    model.status = FitStatus::MaxIterations;

    for it in 1..=opts.hyper.max_outer_iters {
        let mut nonconv = 0;
        for d in 0..model.n_views() {
            for s in 0..model.n_subgroups() {
                let up = update_xi(&model, data, d, s, opts);
                nonconv += usize::from(!up.converged);
                model.set_xi(d, s, up.value);
            }
        }
        for d in 0..model.n_views() {
            let up = update_g(&model, data, d, opts);
            nonconv += usize::from(!up.converged);
            model.set_g(d, up.value);
        }
        for s in 0..model.n_subgroups() {
            let up = update_z(&model, data, s, opts);
            nonconv += usize::from(!up.converged);
            model.z[s] = up.value;
        }
        let up = update_theta(&model, data, opts);
        nonconv += usize::from(!up.converged);
        model.theta = up.value;
        model.inner_nonconverged += nonconv;

        let (unpen, total) = objective(&model, data);
        model.trace.records.push(LossRecord {
            unpenalized: unpen,
            penalty: total - unpen,
            total,
        });
        if !total.is_finite() {
            model.status = FitStatus::Diverged { iteration: it };
            break;
        }
        if best.as_ref().is_none_or(|(b, _)| total <= *b) {
            best = Some((total, model.clone()));
        }
        if it > 1 && unpen > prev_unpen * (1.0 + DIVERGENCE_RATIO) {
            model.status = FitStatus::Diverged { iteration: it };
            break;
        }
        let rel = (prev_unpen - unpen).abs() / prev_unpen.abs().max(f64::MIN_POSITIVE);
        prev_unpen = unpen;
        if rel < opts.hyper.eps_outer {
            model.status = FitStatus::Converged { iterations: it };
            break;
        }
    }

    if let FitStatus::Diverged { iteration } = model.status {
        let msg = format!("unpenalized objective increased by more than 1% at outer iteration {iteration}");
        log::warn!("{msg}");
        if let Some((_, mut b)) = best {
            // keep the full trace so the divergence stays visible
            b.trace = model.trace.clone();
            b.inner_nonconverged = model.inner_nonconverged;
            model = b;
            model.status = FitStatus::Diverged { iteration };
        }
        model.diagnostics.push(msg);
    } else if model.status == FitStatus::MaxIterations {
        model
            .diagnostics
            .push(format!("reached {} outer iterations without converging", opts.hyper.max_outer_iters));
    }
    Ok(model)
}
