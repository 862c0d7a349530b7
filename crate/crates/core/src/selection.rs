//! Tuning: BIC over a `(lambda_G, lambda_xi)` grid, choice of `K` from the
//! spectrum of the concatenated data, and bootstrap stability selection.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    standardize, FactorModel, FitStatus, MultiViewDataset, Outcome, SelectedVariable, SelectionReport, ZERO_TOL,
};
use crate::error::{HipError, Result};
use crate::linalg::singular_values;
use crate::metrics;
use crate::penalty::support;
use crate::prediction::{predict_outcome, predict_scores, PredictedOutcome};
use crate::simulation::replicate_seed;
use crate::solver::{fit, fit_from, initialize, prepare, unpenalized_objective, FitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Grid,
    Random,
}

/// Candidate `(lambda_G, lambda_xi)` pairs on an `a x a` grid over `(0, lambda_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub steps: usize,
    pub lambda_max: f64,
    pub mode: GridMode,
    pub fraction: f64,
    pub candidates: Vec<(f64, f64)>,
}

impl LambdaGrid {
    /// Grid values `lambda_max * i / a` for `i = 1..=a`.
    pub fn axis(steps: usize, lambda_max: f64) -> Vec<f64> {
        (1..=steps).map(|i| lambda_max * i as f64 / steps as f64).collect()
    }

    fn check(steps: usize, lambda_max: f64) -> Result<()> {
        if steps == 0 {
            return Err(HipError::InvalidInput("grid needs at least one step".into()));
        }
        if !(lambda_max > 0.0 && lambda_max.is_finite()) {
            return Err(HipError::InvalidInput("lambda_max must be positive".into()));
        }
        Ok(())
    }

    pub fn full(steps: usize, lambda_max: f64) -> Result<Self> {
        Self::check(steps, lambda_max)?;
        let axis = Self::axis(steps, lambda_max);
        let candidates = axis
            .iter()
            .flat_map(|&g| axis.iter().map(move |&x| (g, x)))
            .collect();
        Ok(LambdaGrid {
            steps,
            lambda_max,
            mode: GridMode::Grid,
            fraction: 1.0,
            candidates,
        })
    }

    /// `ceil(fraction * a^2)` distinct pairs drawn without replacement.
    pub fn random(steps: usize, lambda_max: f64, fraction: f64, seed: u64) -> Result<Self> {
        Self::check(steps, lambda_max)?;
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(HipError::InvalidInput(format!("fraction {fraction} must lie in (0, 1]")));
        }
        let total = steps * steps;
        // tolerance keeps e.g. 0.15 * 64 = 9.600000000000001 from rounding past its ceiling
        let count = ((fraction * total as f64) - 1e-9).ceil().clamp(1.0, total as f64) as usize;
        let axis = Self::axis(steps, lambda_max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = sample(&mut rng, total, count).into_vec();
        picked.sort_unstable();
        let candidates = picked.iter().map(|&i| (axis[i / steps], axis[i % steps])).collect();
        Ok(LambdaGrid {
            steps,
            lambda_max,
            mode: GridMode::Random,
            fraction,
            candidates,
        })
    }

    pub fn from_candidates(candidates: Vec<(f64, f64)>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(HipError::InvalidInput("empty lambda grid".into()));
        }
        if candidates.iter().any(|&(g, x)| !(g >= 0.0 && x >= 0.0 && g.is_finite() && x.is_finite())) {
            return Err(HipError::InvalidInput("lambda candidates must be nonnegative".into()));
        }
        let lambda_max = candidates.iter().fold(0.0_f64, |m, &(g, x)| m.max(g).max(x));
        Ok(LambdaGrid {
            steps: candidates.len(),
            lambda_max,
            mode: GridMode::Grid,
            fraction: 1.0,
            candidates,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicRecord {
    pub lambda_g: f64,
    pub lambda_xi: f64,
    pub k: usize,
    pub bic: f64,
    /// Nonzero rows summed over all `B^{d,s}`.
    pub lambda_b: usize,
    pub unpenalized: f64,
    pub converged: bool,
    pub status: FitStatus,
    pub outer_iterations: usize,
}

/// Total count of nonzero rows over every `B^{d,s}`.
pub fn model_size(model: &FactorModel) -> usize {
    model.b_all().iter().flatten().map(|b| support(b, ZERO_TOL).len()).sum()
}

/// `2 * loss + lambda_B * ln(N)`.
pub fn bic_from_parts(loss: f64, lambda_b: usize, n: usize) -> f64 {
    2.0 * loss + lambda_b as f64 * (n as f64).ln()
}

/// BIC of a fitted model on its (fit-scale) training data: twice the
/// unpenalized loss plus `lambda_B log N`.
pub fn bic(model: &FactorModel, data: &MultiViewDataset) -> f64 {
    let n: usize = data.subgroup_sizes().iter().sum();
    bic_from_parts(unpenalized_objective(model, data), model_size(model), n)
}

#[derive(Debug, Clone)]
pub struct LambdaSearch {
    pub best: (f64, f64),
    pub best_model: FactorModel,
    /// One record per candidate, in candidate order.
    pub records: Vec<BicRecord>,
    /// Every candidate fit diverged; `best` is the one with the lowest final objective.
    pub all_diverged: bool,
}

impl LambdaSearch {
    pub fn best_bic(&self) -> f64 {
        self.records
            .iter()
            .find(|r| (r.lambda_g, r.lambda_xi) == self.best)
            .map_or(f64::INFINITY, |r| r.bic)
    }
}

/// Ranking used to pick the winner: smallest BIC, then the larger
/// `lambda_G + lambda_xi`, then the larger `lambda_G`.
fn better(a: &BicRecord, b: &BicRecord) -> std::cmp::Ordering {
    a.bic
        .total_cmp(&b.bic)
        .then((b.lambda_g + b.lambda_xi).total_cmp(&(a.lambda_g + a.lambda_xi)))
        .then(b.lambda_g.total_cmp(&a.lambda_g))
        .then(b.lambda_xi.total_cmp(&a.lambda_xi))
}

/// Fits one model per candidate pair from a shared initialization and
/// returns the pair with the smallest BIC.
pub fn search_lambda(data: &MultiViewDataset, k: usize, grid: &LambdaGrid, opts: &FitOptions) -> Result<LambdaSearch> {
    if grid.candidates.is_empty() {
        return Err(HipError::InvalidInput("empty lambda grid".into()));
    }
    let opts = opts.with_k(k);
    opts.validate()?;
    let (scaled, st) = prepare(data, opts.standardize_x);
    let init = initialize(&scaled, &opts.hyper, opts.seed)?;
    let fits: Vec<(BicRecord, FactorModel)> = grid
        .candidates
        .par_iter()
        .map(|&(lg, lx)| {
            let o = opts.with_lambdas(lg, lx);
            let model = fit_from(init.clone(), &scaled, &o, st.clone())?;
            let lambda_b = model_size(&model);
            let unpen = unpenalized_objective(&model, &scaled);
            let n: usize = scaled.subgroup_sizes().iter().sum();
            let rec = BicRecord {
                lambda_g: lg,
                lambda_xi: lx,
                k,
                bic: bic_from_parts(unpen, lambda_b, n),
                lambda_b,
                unpenalized: unpen,
                converged: model.status.is_converged(),
                status: model.status,
                outer_iterations: model.trace.len(),
            };
            Ok((rec, model))
        })
        .collect::<Result<_>>()?;

    let usable: Vec<usize> = (0..fits.len())
        .filter(|&i| !matches!(fits[i].0.status, FitStatus::Diverged { .. }))
        .collect();
    let all_diverged = usable.is_empty();
    let best_idx = if all_diverged {
        let final_obj = |m: &FactorModel| m.trace.last().map_or(f64::INFINITY, |r| r.total);
        (0..fits.len())
            .min_by(|&a, &b| final_obj(&fits[a].1).total_cmp(&final_obj(&fits[b].1)).then(a.cmp(&b)))
            .expect("nonempty grid")
    } else {
        *usable
            .iter()
            .min_by(|&&a, &&b| better(&fits[a].0, &fits[b].0))
            .expect("nonempty")
    };
    if all_diverged {
        log::warn!("every lambda candidate diverged; returning the lowest final objective");
    }
    let best = (fits[best_idx].0.lambda_g, fits[best_idx].0.lambda_xi);
    let mut records = Vec::with_capacity(fits.len());
    let mut best_model = None;
    for (i, (rec, model)) in fits.into_iter().enumerate() {
        records.push(rec);
        if i == best_idx {
            best_model = Some(model);
        }
    }
    Ok(LambdaSearch {
        best,
        best_model: best_model.expect("best index in range"),
        records,
        all_diverged,
    })
}

/// What stands in for the "eigenvalues" of the concatenated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EigenProxy {
    /// Squared singular values.
    Squared,
    /// Singular values as returned by the SVD.
    #[default]
    Singular,
}

/// Spectrum of the `N x sum(p_d)` concatenated views, descending.
///
/// With `use_raw` unset the views are first standardized within each subgroup.
pub fn scree(data: &MultiViewDataset, use_raw: bool, proxy: EigenProxy) -> Vec<f64> {
    let cat = if use_raw {
        data.concatenated()
    } else {
        standardize(data, true).0.concatenated()
    };
    let sv = singular_values(&cat);
    match proxy {
        EigenProxy::Squared => sv.into_iter().map(|s| s * s).collect(),
        EigenProxy::Singular => sv,
    }
}

/// First `k` (1-based) at which `(e_k - e_{k+1}) / e_k` drops below `threshold`.
///
/// Returns the last index when the spectrum never flattens.
pub fn select_k_from_spectrum(eigenvalues: &[f64], threshold: f64) -> usize {
    for k in 1..eigenvalues.len() {
        let e = eigenvalues[k - 1];
        if e <= 0.0 {
            return k;
        }
        let change = (e - eigenvalues[k]) / e;
        if change < threshold {
            return k;
        }
    }
    eigenvalues.len().max(1)
}

pub fn select_k_simple(data: &MultiViewDataset, threshold: f64, use_raw: bool, proxy: EigenProxy) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(HipError::InvalidInput(format!("threshold {threshold} must lie in (0, 1)")));
    }
    Ok(select_k_from_spectrum(&scree(data, use_raw, proxy), threshold))
}

#[derive(Debug, Clone)]
pub struct AlgorithmicK {
    pub k: usize,
    pub simple_k: usize,
    /// `(K, best BIC)` for the two candidates.
    pub candidates: Vec<(usize, f64)>,
    pub searches: Vec<LambdaSearch>,
}

/// Runs the lambda search at `k` from [`select_k_simple`] and at `k + 1`
/// and keeps the `K` with the smaller best BIC (the smaller `K` on ties).
pub fn select_k_algorithmic(
    data: &MultiViewDataset,
    threshold: f64,
    use_raw: bool,
    proxy: EigenProxy,
    grid: &LambdaGrid,
    opts: &FitOptions,
) -> Result<AlgorithmicK> {
    let simple_k = select_k_simple(data, threshold, use_raw, proxy)?;
    let min_n = data.subgroup_sizes().into_iter().min().unwrap_or(0);
    let ks: Vec<usize> = [simple_k, simple_k + 1].into_iter().filter(|&k| k <= min_n).collect();
    let mut searches = Vec::new();
    let mut candidates = Vec::new();
    for &k in &ks {
        let srch = search_lambda(data, k, grid, opts)?;
        candidates.push((k, srch.best_bic()));
        searches.push(srch);
    }
    let k = candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map_or(simple_k, |c| c.0);
    Ok(AlgorithmicK {
        k,
        simple_k,
        candidates,
        searches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n_boot: usize,
    /// Fraction of each view's variables to keep, by selection count.
    pub top_fraction: Vec<f64>,
    /// When set, every resample is tuned over this grid; otherwise the
    /// lambdas in the fit options are used as is.
    pub grid: Option<LambdaGrid>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReplicate {
    pub in_bag: Vec<Vec<usize>>,
    pub out_of_bag: Vec<Vec<usize>>,
    pub lambda: (f64, f64),
    /// Test MSE (continuous, fit scale) or accuracy (multiclass) on the out-of-bag samples.
    pub oob_score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StabilityResult {
    pub report: SelectionReport,
    pub replicates: Vec<BootstrapReplicate>,
}

/// In-bag draws (with replacement, `n_s` per subgroup) and the sorted
/// out-of-bag complement of each subgroup.
pub fn bootstrap_indices<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut in_bag = Vec::with_capacity(sizes.len());
    let mut oob = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let draws: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut seen = vec![false; n];
        for &i in &draws {
            seen[i] = true;
        }
        oob.push((0..n).filter(|&i| !seen[i]).collect());
        in_bag.push(draws);
    }
    (in_bag, oob)
}

fn oob_score(model: &FactorModel, data: &MultiViewDataset, oob: &[Vec<usize>]) -> Result<Option<f64>> {
    if oob.iter().any(Vec::is_empty) {
        return Ok(None);
    }
    let test = data.select_rows(oob)?;
    let pred = predict_outcome(model, predict_scores(model, &test)?)?;
    let score = match (&pred.outcome, &test.outcome) {
        (PredictedOutcome::Continuous { standardized, .. }, Outcome::Continuous { .. }) => {
            let obs = model.standardizer.apply_outcome(&test.outcome)?;
            let mut sse = 0.0;
            let mut cnt = 0usize;
            for (p, o) in standardized.iter().zip(obs.matrices()) {
                sse += metrics::test_mse(p, o)? * p.len() as f64;
                cnt += p.len();
            }
            sse / cnt.max(1) as f64
        }
        (PredictedOutcome::MultiClass { labels, .. }, Outcome::MultiClass { .. }) => {
            let truth = test.outcome.labels().expect("multiclass").concat();
            metrics::accuracy(&labels.concat(), &truth)?
        }
        _ => return Ok(None),
    };
    Ok(Some(score))
}

/// Stability selection over bootstrap resamples that keep every subgroup's size.
///
/// For each `(view, subgroup)` the report keeps the top `top_fraction[d]`
/// of that view's variables by selection count, plus any tied with the
/// last one kept; variables never selected are left out. Weights are the
/// mean of `sum_k |B_lk|` over the resamples that selected the variable.
pub fn bootstrap_stability(data: &MultiViewDataset, boot: &BootstrapOptions, opts: &FitOptions) -> Result<StabilityResult> {
    if boot.n_boot == 0 {
        return Err(HipError::InvalidInput("n_boot must be at least 1".into()));
    }
    let p = data.view_sizes();
    if boot.top_fraction.len() != p.len() {
        return Err(HipError::LengthMismatch {
            expected: p.len(),
            got: boot.top_fraction.len(),
        });
    }
    if boot.top_fraction.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(HipError::InvalidInput("top fractions must lie in (0, 1]".into()));
    }
    let sizes = data.subgroup_sizes();
    let n_sub = sizes.len();

    type RepOut = (BootstrapReplicate, Vec<Vec<Vec<(usize, f64)>>>);
    let reps: Vec<RepOut> = (0..boot.n_boot)
        .into_par_iter()
        .map(|r| {
            let rep_seed = replicate_seed(boot.seed, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let (in_bag, out_of_bag) = bootstrap_indices(&sizes, &mut rng);
            let train = data.select_rows(&in_bag)?;
            let mut o = opts.clone();
            o.seed = rep_seed;
            let (model, lambda) = match &boot.grid {
                Some(g) => {
                    let srch = search_lambda(&train, o.hyper.k, g, &o)?;
                    (srch.best_model, srch.best)
                }
                None => (fit(&train, &o)?, (o.hyper.lambda_g, o.hyper.lambda_xi)),
            };
            let sel: Vec<Vec<Vec<(usize, f64)>>> = (0..p.len())
                .map(|d| {
                    (0..n_sub)
                        .map(|s| {
                            let w = model.row_weights(d, s);
                            support(model.b(d, s), ZERO_TOL).into_iter().map(|l| (l, w[l])).collect()
                        })
                        .collect()
                })
                .collect();
            let oob_score = oob_score(&model, data, &out_of_bag)?;
            Ok((
                BootstrapReplicate {
                    in_bag,
                    out_of_bag,
                    lambda,
                    oob_score,
                },
                sel,
            ))
        })
        .collect::<Result<_>>()?;

    let mut selected = Vec::with_capacity(p.len());
    for (d, &pd) in p.iter().enumerate() {
        let mut per_sub = Vec::with_capacity(n_sub);
        for s in 0..n_sub {
            let mut counts = vec![0usize; pd];
            let mut wsum = vec![0.0; pd];
            for (_, sel) in &reps {
                for &(l, w) in &sel[d][s] {
                    counts[l] += 1;
                    wsum[l] += w;
                }
            }
            let mut ranked: Vec<usize> = (0..pd).filter(|&l| counts[l] > 0).collect();
            ranked.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
            let keep = ((boot.top_fraction[d] * pd as f64) - 1e-9).ceil().max(1.0) as usize;
            if ranked.len() > keep {
                let cutoff = counts[ranked[keep - 1]];
                ranked.retain(|&l| counts[l] >= cutoff);
            }
            per_sub.push(
                ranked
                    .into_iter()
                    .map(|l| SelectedVariable {
                        index: l,
                        name: data.variable_names[d][l].clone(),
                        weight: wsum[l] / counts[l] as f64,
                        times_selected: counts[l],
                    })
                    .collect(),
            );
        }
        selected.push(per_sub);
    }
    Ok(StabilityResult {
        report: SelectionReport {
            view_names: data.view_names.clone(),
            subgroup_names: data.subgroup_names.clone(),
            selected,
            n_fits: boot.n_boot,
        },
        replicates: reps.into_iter().map(|(r, _)| r).collect(),
    })
}
