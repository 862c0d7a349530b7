//! The four block updates of the alternating scheme and the smooth losses
//! and gradients they are built from.

use ndarray::Zip;

use super::inner::{adagrad, fista, AdagradParams, FistaParams, InnerResult};
use super::softmax::{cross_entropy, cross_entropy_grad};
use super::{FitOptions, InnerOptimizer};
use crate::data_model::{FactorModel, Matrix, MultiViewDataset, Outcome};
use crate::linalg::{solve_gram, sym_max_eigenvalue};

/// `||X - Z B^T||_F^2` as a quadratic in `B`, with `Z` fixed:
/// `||X||^2 - 2 <B, X^T Z> + <B Z^T Z, B>`.
#[derive(Debug, Clone)]
pub struct BlockQuadratic {
    x_sq: f64,
    xtz: Matrix,
    ztz: Matrix,
}

impl BlockQuadratic {
    pub fn new(x: &Matrix, z: &Matrix) -> Self {
        BlockQuadratic {
            x_sq: x.iter().map(|v| v * v).sum(),
            xtz: x.t().dot(z),
            ztz: z.t().dot(z),
        }
    }

    pub fn value(&self, b: &Matrix) -> f64 {
        let bc = b.dot(&self.ztz);
        self.x_sq - 2.0 * (b * &self.xtz).sum() + (&bc * b).sum()
    }

    /// `-2 (X - Z B^T)^T Z`.
    pub fn grad(&self, b: &Matrix) -> Matrix {
        (b.dot(&self.ztz) - &self.xtz) * 2.0
    }

    pub fn ztz_max_eigenvalue(&self) -> f64 {
        sym_max_eigenvalue(&self.ztz)
    }
}

fn max_sq(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v * v))
}

/// Reconstruction loss of block `(d, s)` as a function of `Xi^{d,s}`.
pub fn xi_loss(x: &Matrix, z: &Matrix, g: &Matrix, xi: &Matrix) -> f64 {
    BlockQuadratic::new(x, z).value(&(g * xi))
}

/// `-2 (X - Z B^T)^T Z * G` (element-wise), the gradient of [`xi_loss`].
pub fn xi_gradient(x: &Matrix, z: &Matrix, g: &Matrix, xi: &Matrix) -> Matrix {
    BlockQuadratic::new(x, z).grad(&(g * xi)) * g
}

/// `sum_s ||X^{d,s} - Z^s (G * Xi^{d,s})^T||^2` as a function of `G^d`.
pub fn g_loss(xs: &[Matrix], zs: &[Matrix], g: &Matrix, xis: &[Matrix]) -> f64 {
    xs.iter()
        .zip(zs)
        .zip(xis)
        .map(|((x, z), xi)| BlockQuadratic::new(x, z).value(&(g * xi)))
        .sum()
}

/// `-2 sum_s (X^{d,s} - Z^s B^{d,s T})^T Z^s * Xi^{d,s}`.
pub fn g_gradient(xs: &[Matrix], zs: &[Matrix], g: &Matrix, xis: &[Matrix]) -> Matrix {
    let mut out = Matrix::zeros(g.dim());
    for ((x, z), xi) in xs.iter().zip(zs).zip(xis) {
        out += &(BlockQuadratic::new(x, z).grad(&(g * xi)) * xi);
    }
    out
}

/// Cross-entropy plus reconstruction loss of subgroup `s` as a function of `Z^s`.
pub fn z_multiclass_loss(xs: &[&Matrix], bs: &[&Matrix], y: &Matrix, theta: &Matrix, z: &Matrix) -> f64 {
    let recon: f64 = xs
        .iter()
        .zip(bs)
        .map(|(x, b)| (*x - &z.dot(&b.t())).mapv(|v| v * v).sum())
        .sum();
    cross_entropy(y, &z.dot(theta)) + recon
}

/// `(A - Y) Theta^T - 2 sum_d (X^{d,s} - Z B^{d,s T}) B^{d,s}`.
pub fn z_multiclass_gradient(
    xs: &[&Matrix],
    bs: &[&Matrix],
    y: &Matrix,
    theta: &Matrix,
    z: &Matrix,
) -> Matrix {
    let (_, gw) = cross_entropy_grad(y, &z.dot(theta));
    let mut g = gw.dot(&theta.t());
    for (x, b) in xs.iter().zip(bs) {
        let r = *x - &z.dot(&b.t());
        g -= &(r.dot(*b) * 2.0);
    }
    g
}

/// `sum_s F(Y^s, Z^s Theta)` for a multiclass outcome.
pub fn theta_multiclass_loss(ys: &[Matrix], zs: &[Matrix], theta: &Matrix) -> f64 {
    ys.iter().zip(zs).map(|(y, z)| cross_entropy(y, &z.dot(theta))).sum()
}

/// `sum_s Z^{s T} (A^s - Y^s)`.
pub fn theta_multiclass_gradient(ys: &[Matrix], zs: &[Matrix], theta: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(theta.dim());
    for (y, z) in ys.iter().zip(zs) {
        let (_, gw) = cross_entropy_grad(y, &z.dot(theta));
        g += &z.t().dot(&gw);
    }
    g
}

/// Result of one block update.
#[derive(Debug, Clone)]
pub struct BlockUpdate {
    pub value: Matrix,
    pub iterations: usize,
    pub converged: bool,
    /// Ridge added to a singular Gram matrix (closed-form updates only).
    pub ridge: f64,
}

impl From<InnerResult> for BlockUpdate {
    fn from(r: InnerResult) -> Self {
        BlockUpdate {
            value: r.x,
            iterations: r.iterations,
            converged: r.converged,
            ridge: 0.0,
        }
    }
}

fn run_smooth_or_prox(
    x0: &Matrix,
    penalized: bool,
    lambda: f64,
    lipschitz: f64,
    f: impl Fn(&Matrix) -> f64,
    grad: impl Fn(&Matrix) -> Matrix,
    opts: &FitOptions,
) -> BlockUpdate {
    let h = &opts.hyper;
    if !penalized && opts.inner_optimizer == InnerOptimizer::AdaptiveGradient {
        return adagrad(
            x0,
            f,
            grad,
            &AdagradParams {
                rate: opts.adagrad_rate,
                eps: h.eps_inner,
                max_iters: h.max_inner_iters,
            },
        )
        .into();
    }
    fista(
        x0,
        f,
        grad,
        &FistaParams {
            lambda: if penalized { lambda } else { 0.0 },
            lipschitz,
            initial_step: opts.line_search.initial_step,
            beta: opts.line_search.beta,
            eps: h.eps_inner,
            max_iters: h.max_inner_iters,
        },
    )
    .into()
}

/// Minimizes `||X^{d,s} - Z^s (G^d * Xi)^T||^2 + lambda_xi gamma_d sum_l ||xi_l||` over `Xi`.
pub fn update_xi(model: &FactorModel, data: &MultiViewDataset, d: usize, s: usize, opts: &FitOptions) -> BlockUpdate {
    let q = BlockQuadratic::new(&data.views[d][s], &model.z[s]);
    let g = model.g(d);
    let lipschitz = 2.0 * q.ztz_max_eigenvalue() * max_sq(g);
    run_smooth_or_prox(
        model.xi(d, s),
        data.gamma[d],
        opts.hyper.lambda_xi,
        lipschitz,
        |xi| q.value(&(g * xi)),
        |xi| q.grad(&(g * xi)) * g,
        opts,
    )
}

/// Minimizes `sum_s ||X^{d,s} - Z^s (G * Xi^{d,s})^T||^2 + lambda_G gamma_d sum_l ||g_l||` over `G`.
pub fn update_g(model: &FactorModel, data: &MultiViewDataset, d: usize, opts: &FitOptions) -> BlockUpdate {
    let qs: Vec<BlockQuadratic> = (0..model.n_subgroups())
        .map(|s| BlockQuadratic::new(&data.views[d][s], &model.z[s]))
        .collect();
    let xis = &model.xi_all()[d];
    let lipschitz: f64 = qs
        .iter()
        .zip(xis)
        .map(|(q, xi)| 2.0 * q.ztz_max_eigenvalue() * max_sq(xi))
        .sum();
    run_smooth_or_prox(
        model.g(d),
        data.gamma[d],
        opts.hyper.lambda_g,
        lipschitz,
        |g| qs.iter().zip(xis).map(|(q, xi)| q.value(&(g * xi))).sum(),
        |g| {
            let mut out = Matrix::zeros(g.dim());
            for (q, xi) in qs.iter().zip(xis) {
                let gb = q.grad(&(g * xi));
                Zip::from(&mut out).and(&gb).and(xi).for_each(|o, &a, &b| *o += a * b);
            }
            out
        },
        opts,
    )
}

/// Updates `Z^s`: exact least squares on the views and outcome for a
/// continuous outcome, Adagrad on cross-entropy plus reconstruction otherwise.
pub fn update_z(model: &FactorModel, data: &MultiViewDataset, s: usize, opts: &FitOptions) -> BlockUpdate {
    let k = model.k();
    let y = &data.outcome.matrices()[s];
    match &data.outcome {
        Outcome::Continuous { .. } => {
            // Z = X~ B~^T (B~ B~^T)^{-1} with X~ = [X^1 .. X^D, Y], B~ = [B^1T .. B^DT, Theta]
            let mut rhs = y.dot(&model.theta.t());
            let mut gram = model.theta.dot(&model.theta.t());
            for d in 0..model.n_views() {
                let b = model.b(d, s);
                rhs += &data.views[d][s].dot(b);
                gram += &b.t().dot(b);
            }
            let ridge = opts.hyper.ridge.resolve(gram.diag().sum(), k);
            let sol = solve_gram(&gram, &rhs.t().to_owned(), ridge);
            if sol.ridge > 0.0 {
                log::warn!("singular Gram matrix in Z update for subgroup {s}; added ridge {}", sol.ridge);
            }
            BlockUpdate {
                value: sol.solution.t().to_owned(),
                iterations: 1,
                converged: true,
                ridge: sol.ridge,
            }
        }
        Outcome::MultiClass { .. } => {
            let xs: Vec<&Matrix> = (0..model.n_views()).map(|d| &data.views[d][s]).collect();
            let bs: Vec<&Matrix> = (0..model.n_views()).map(|d| model.b(d, s)).collect();
            // precomputed pieces of the reconstruction term
            let x_sq: f64 = xs.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum();
            let mut xb = Matrix::zeros((y.nrows(), k));
            let mut btb = Matrix::zeros((k, k));
            for (x, b) in xs.iter().zip(&bs) {
                xb += &x.dot(*b);
                btb += &b.t().dot(*b);
            }
            let theta = &model.theta;
            adagrad(
                &model.z[s],
                |z| {
                    let recon = x_sq - 2.0 * (z * &xb).sum() + (&z.dot(&btb) * z).sum();
                    cross_entropy(y, &z.dot(theta)) + recon
                },
                |z| {
                    let (_, gw) = cross_entropy_grad(y, &z.dot(theta));
                    gw.dot(&theta.t()) + (z.dot(&btb) - &xb) * 2.0
                },
                &AdagradParams {
                    rate: opts.adagrad_rate,
                    eps: opts.hyper.eps_inner,
                    max_iters: opts.hyper.max_inner_iters,
                },
            )
            .into()
        }
    }
}

/// Updates the shared `Theta` from the subgroup-stacked scores.
pub fn update_theta(model: &FactorModel, data: &MultiViewDataset, opts: &FitOptions) -> BlockUpdate {
    let ys = data.outcome.matrices();
    match &data.outcome {
        Outcome::Continuous { .. } => {
            let k = model.k();
            let mut gram = Matrix::zeros((k, k));
            let mut rhs = Matrix::zeros((k, model.theta.ncols()));
            for (z, y) in model.z.iter().zip(ys) {
                gram += &z.t().dot(z);
                rhs += &z.t().dot(y);
            }
            let ridge = opts.hyper.ridge.resolve(gram.diag().sum(), k);
            let sol = solve_gram(&gram, &rhs, ridge);
            if sol.ridge > 0.0 {
                log::warn!("singular Gram matrix in Theta update; added ridge {}", sol.ridge);
            }
            BlockUpdate {
                value: sol.solution,
                iterations: 1,
                converged: true,
                ridge: sol.ridge,
            }
        }
        Outcome::MultiClass { .. } => adagrad(
            &model.theta,
            |t| theta_multiclass_loss(ys, &model.z, t),
            |t| theta_multiclass_gradient(ys, &model.z, t),
            &AdagradParams {
                rate: opts.adagrad_rate,
                eps: opts.hyper.eps_inner,
                max_iters: opts.hyper.max_inner_iters,
            },
        )
        .into(),
    }
}
