//! Synthetic benchmarks with known sparse loadings.
//!
//! Loadings have `n_signal` important rows per subgroup with entries drawn
//! from `U(0.5, 1)` and exact zeros elsewhere; their columns are then
//! orthogonalized. Data follow `X^{d,s} = Z^s B^{d,s T} + sigma_x E` with
//! standard normal `Z` and `E`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data_model::{Matrix, MultiViewDataset, Outcome, OutcomeKind};
use crate::error::{HipError, Result};
use crate::solver::softmax_rows;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overlap {
    /// Every subgroup shares the same important variables.
    Full,
    /// Subgroup `s` uses rows `s * n_signal / 2 .. s * n_signal / 2 + n_signal`.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    P1,
    P2,
    P3,
    Custom(Vec<usize>),
}

impl Setting {
    pub fn view_sizes(&self) -> Vec<usize> {
        match self {
            Setting::P1 => vec![300, 350],
            Setting::P2 => vec![1000, 1500],
            Setting::P3 => vec![5000, 6000],
            Setting::Custom(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelRule {
    /// Class with the largest softmax probability.
    Argmax,
    /// Class drawn from the softmax probabilities.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub overlap: Overlap,
    pub setting: Setting,
    pub outcome: OutcomeKind,
    pub subgroup_sizes: Vec<usize>,
    pub k_true: usize,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// `K x q` (continuous) or `K x m` (multiclass); defaults per outcome type.
    pub theta: Option<Vec<Vec<f64>>>,
    pub n_signal: usize,
    pub label_rule: LabelRule,
    pub seed: u64,
}

impl SimScenario {
    pub fn new(overlap: Overlap, setting: Setting, outcome: OutcomeKind, seed: u64) -> Self {
        SimScenario {
            overlap,
            setting,
            outcome,
            subgroup_sizes: vec![250, 260],
            k_true: 2,
            sigma_x: 0.2,
            sigma_y: 0.5,
            theta: None,
            n_signal: 50,
            label_rule: LabelRule::Argmax,
            seed,
        }
    }

    /// True outcome coefficients: `[1, 0]^T` for a continuous outcome and
    /// `[[1, 0.5], [0.8, 0.2]]` for a multiclass one.
    pub fn true_theta(&self) -> Result<Matrix> {
        let rows = match &self.theta {
            Some(t) => t.clone(),
            None => match self.outcome {
                OutcomeKind::Continuous => vec![vec![1.0], vec![0.0]],
                OutcomeKind::Multiclass => vec![vec![1.0, 0.5], vec![0.8, 0.2]],
            },
        };
        let cols = rows.first().map_or(0, Vec::len);
        if rows.len() != self.k_true || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(HipError::InvalidInput(format!(
                "theta must be a K_true x q matrix with K_true = {}",
                self.k_true
            )));
        }
        Ok(Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j]))
    }

    /// Important rows of `B^{d,s}` for subgroup `s`.
    pub fn signal_indices(&self, s: usize) -> Vec<usize> {
        let offset = match self.overlap {
            Overlap::Full => 0,
            Overlap::Partial => s * self.n_signal / 2,
        };
        (offset..offset + self.n_signal).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HipError::InvalidInput(m));
        let sizes = self.setting.view_sizes();
        if sizes.is_empty() || self.subgroup_sizes.is_empty() {
            return bad("scenario needs at least one view and one subgroup".into());
        }
        if self.k_true == 0 || self.k_true > self.n_signal {
            return bad(format!("K_true = {} must lie in 1..=n_signal", self.k_true));
        }
        let last = self.signal_indices(self.subgroup_sizes.len() - 1);
        let need = *last.last().unwrap_or(&0) + 1;
        if let Some(&p) = sizes.iter().find(|&&p| p < need) {
            return bad(format!("view with {p} variables cannot hold signal rows up to {need}"));
        }
        if self.subgroup_sizes.iter().any(|&n| n < 2) {
            return bad("every subgroup needs at least 2 samples".into());
        }
        if !(self.sigma_x >= 0.0 && self.sigma_y >= 0.0) {
            return bad("noise scales must be nonnegative".into());
        }
        let theta = self.true_theta()?;
        if self.outcome == OutcomeKind::Multiclass && theta.ncols() < 2 {
            return bad("multiclass theta needs at least 2 columns".into());
        }
        Ok(())
    }
}

/// `signal[d][s]`: important rows of `B^{d,s}`.
pub type SignalSets = Vec<Vec<Vec<usize>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `b[d][s]`.
    pub b: Vec<Vec<Matrix>>,
    pub z_train: Vec<Matrix>,
    pub z_test: Vec<Matrix>,
    pub theta: Matrix,
    /// `signal[d][s]`: important rows of `B^{d,s}`.
    pub signal: Vec<Vec<Vec<usize>>>,
}

/// Modified Gram-Schmidt on the columns of `m`, in place. Columns are left
/// unnormalized; only their mutual projections are removed.
pub fn orthogonalize_columns(m: &mut Matrix) {
    let k = m.ncols();
    for j in 0..k {
        for i in 0..j {
            let (qi, mut qj) = {
                let (a, b) = m.multi_slice_mut((ndarray::s![.., i], ndarray::s![.., j]));
                (a, b)
            };
            let nn = qi.dot(&qi);
            if nn > 0.0 {
                let c = qi.dot(&qj) / nn;
                qj.scaled_add(-c, &qi);
            }
        }
    }
}

/// Draws the true loadings for every `(view, subgroup)` block.
pub fn generate_loadings<R: Rng + ?Sized>(
    scenario: &SimScenario,
    rng: &mut R,
) -> Result<(Vec<Vec<Matrix>>, SignalSets)> {
    scenario.validate()?;
    let unif = Uniform::new(0.5, 1.0).expect("valid range");
    let n_sub = scenario.subgroup_sizes.len();
    let mut bs = Vec::new();
    let mut signal = Vec::new();
    for &p in &scenario.setting.view_sizes() {
        let mut view_b = Vec::with_capacity(n_sub);
        let mut view_sig = Vec::with_capacity(n_sub);
        for s in 0..n_sub {
            let idx = scenario.signal_indices(s);
            let mut b = Matrix::zeros((p, scenario.k_true));
            for &l in &idx {
                for k in 0..scenario.k_true {
                    b[[l, k]] = unif.sample(rng);
                }
            }
            orthogonalize_columns(&mut b);
            view_b.push(b);
            view_sig.push(idx);
        }
        bs.push(view_b);
        signal.push(view_sig);
    }
    Ok((bs, signal))
}

fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

fn draw_split<R: Rng + ?Sized>(
    scenario: &SimScenario,
    b: &[Vec<Matrix>],
    theta: &Matrix,
    rng: &mut R,
) -> Result<(MultiViewDataset, Vec<Matrix>)> {
    let k = scenario.k_true;
    let n_views = b.len();
    let mut views: Vec<Vec<Matrix>> = vec![Vec::new(); n_views];
    let mut zs = Vec::new();
    let mut ys = Vec::new();
    let mut labels = Vec::new();
    for (s, &n) in scenario.subgroup_sizes.iter().enumerate() {
        let z = normal_matrix(rng, n, k);
        for d in 0..n_views {
            let bd = &b[d][s];
            let mut x = z.dot(&bd.t());
            if scenario.sigma_x > 0.0 {
                x.scaled_add(scenario.sigma_x, &normal_matrix(rng, n, bd.nrows()));
            }
            views[d].push(x);
        }
        let w = z.dot(theta);
        match scenario.outcome {
            OutcomeKind::Continuous => {
                let mut y = w;
                if scenario.sigma_y > 0.0 {
                    y.scaled_add(scenario.sigma_y, &normal_matrix(rng, n, theta.ncols()));
                }
                ys.push(y);
            }
            OutcomeKind::Multiclass => {
                let a = softmax_rows(&w);
                let lab = match scenario.label_rule {
                    LabelRule::Argmax => crate::data_model::argmax_rows(&a),
                    LabelRule::Sample => a
                        .rows()
                        .into_iter()
                        .map(|row| {
                            let u: f64 = rng.random();
                            let mut acc = 0.0;
                            for (j, &p) in row.iter().enumerate() {
                                acc += p;
                                if u < acc {
                                    return j;
                                }
                            }
                            row.len() - 1
                        })
                        .collect(),
                };
                labels.push(lab);
            }
        }
        zs.push(z);
    }
    let outcome = match scenario.outcome {
        OutcomeKind::Continuous => Outcome::Continuous {
            y: ys,
            standardized: false,
        },
        OutcomeKind::Multiclass => Outcome::from_labels(&labels, theta.ncols())?,
    };
    Ok((MultiViewDataset::new(views, outcome)?, zs))
}

/// Draws loadings once, then independent training and test sets that share them.
pub fn generate_dataset(scenario: &SimScenario) -> Result<(MultiViewDataset, MultiViewDataset, GroundTruth)> {
    scenario.validate()?;
    let theta = scenario.true_theta()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (b, signal) = generate_loadings(scenario, &mut rng)?;
    let (train, z_train) = draw_split(scenario, &b, &theta, &mut rng)?;
    let (test, z_test) = draw_split(scenario, &b, &theta, &mut rng)?;
    Ok((
        train,
        test,
        GroundTruth {
            b,
            z_train,
            z_test,
            theta,
            signal,
        },
    ))
}

/// Seed of replicate `r` derived from a base seed (SplitMix64 finalizer).
pub fn replicate_seed(base: u64, r: u64) -> u64 {
    let mut z = base.wrapping_add(r.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
