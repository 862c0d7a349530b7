//! Value types shared by the solver, selection and prediction code.
//!
//! Everything here is plain data: once built, a [`MultiViewDataset`] or a
//! [`FactorModel`] is never mutated in place by the library, so both can be
//! shared freely across worker threads.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{HipError, Result};

pub type Matrix = Array2<f64>;

/// Rows of a loading matrix with every entry at or below this magnitude are
/// treated as unselected.
pub const ZERO_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Continuous,
    Multiclass,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// One `n_s x q` matrix per subgroup.
    Continuous { y: Vec<Matrix>, standardized: bool },
    /// One `n_s x m` one-hot indicator matrix per subgroup.
    MultiClass { y: Vec<Matrix> },
}

impl Outcome {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            Outcome::Continuous { .. } => OutcomeKind::Continuous,
            Outcome::MultiClass { .. } => OutcomeKind::Multiclass,
        }
    }

    pub fn matrices(&self) -> &[Matrix] {
        match self {
            Outcome::Continuous { y, .. } | Outcome::MultiClass { y } => y,
        }
    }

    /// Number of outcome columns (`q` or `m`).
    pub fn width(&self) -> usize {
        self.matrices().first().map_or(0, |y| y.ncols())
    }

    /// Builds a one-hot outcome from per-subgroup class labels in `0..m`.
    pub fn from_labels(labels: &[Vec<usize>], m: usize) -> Result<Self> {
        if m < 2 {
            return Err(HipError::InvalidInput(format!(
                "multiclass outcome needs at least 2 classes, got {m}"
            )));
        }
        let mut y = Vec::with_capacity(labels.len());
        for (s, lab) in labels.iter().enumerate() {
            let mut mat = Matrix::zeros((lab.len(), m));
            for (i, &c) in lab.iter().enumerate() {
                if c >= m {
                    return Err(HipError::InvalidOneHot { subgroup: s, row: i });
                }
                mat[[i, c]] = 1.0;
            }
            y.push(mat);
        }
        Ok(Outcome::MultiClass { y })
    }

    /// Class labels (argmax of each one-hot row); `None` for continuous outcomes.
    pub fn labels(&self) -> Option<Vec<Vec<usize>>> {
        match self {
            Outcome::Continuous { .. } => None,
            Outcome::MultiClass { y } => Some(y.iter().map(argmax_rows).collect()),
        }
    }
}

/// Row-wise argmax with lowest-index tie-break.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    m.outer_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeDims {
    Continuous { q: usize },
    MultiClass { m: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimensions {
    pub n_views: usize,
    pub n_subgroups: usize,
    pub subgroup_sizes: Vec<usize>,
    pub n_total: usize,
    pub view_sizes: Vec<usize>,
    pub outcome: OutcomeDims,
}

impl Dimensions {
    pub fn total_variables(&self) -> usize {
        self.view_sizes.iter().sum()
    }
}

/// Views, outcome and per-view penalty flags for `S` subgroups and `D` views.
///
/// `views[d][s]` is the `n_s x p_d` block for view `d` and subgroup `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<Vec<Matrix>>,
    pub outcome: Outcome,
    pub gamma: Vec<bool>,
    pub view_names: Vec<String>,
    pub variable_names: Vec<Vec<String>>,
    pub subgroup_names: Vec<String>,
    pub outcome_names: Vec<String>,
}

impl MultiViewDataset {
    /// Builds a dataset with generated names and every view penalized.
    pub fn new(views: Vec<Vec<Matrix>>, outcome: Outcome) -> Result<Self> {
        let d = views.len();
        let s = views.first().map_or(0, Vec::len);
        let view_names = (0..d).map(|i| format!("view{}", i + 1)).collect();
        let variable_names = views
            .iter()
            .enumerate()
            .map(|(vi, blocks)| {
                let p = blocks.first().map_or(0, |m| m.ncols());
                (0..p).map(|l| format!("v{}_{}", vi + 1, l + 1)).collect()
            })
            .collect();
        let subgroup_names = (0..s).map(|i| format!("subgroup{}", i + 1)).collect();
        let outcome_names = default_outcome_names(&outcome);
        Self::with_names(
            views,
            outcome,
            vec![true; d],
            view_names,
            variable_names,
            subgroup_names,
            outcome_names,
        )
    }

    pub fn with_names(
        views: Vec<Vec<Matrix>>,
        outcome: Outcome,
        gamma: Vec<bool>,
        view_names: Vec<String>,
        variable_names: Vec<Vec<String>>,
        subgroup_names: Vec<String>,
        outcome_names: Vec<String>,
    ) -> Result<Self> {
        let ds = MultiViewDataset {
            views,
            outcome,
            gamma,
            view_names,
            variable_names,
            subgroup_names,
            outcome_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_gamma(mut self, gamma: Vec<bool>) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_subgroups(&self) -> usize {
        self.subgroup_names.len()
    }

    pub fn subgroup_sizes(&self) -> Vec<usize> {
        self.views[0].iter().map(|m| m.nrows()).collect()
    }

    pub fn view_sizes(&self) -> Vec<usize> {
        self.views.iter().map(|blocks| blocks[0].ncols()).collect()
    }

    pub fn dimensions(&self) -> Dimensions {
        let subgroup_sizes = self.subgroup_sizes();
        let outcome = match &self.outcome {
            Outcome::Continuous { .. } => OutcomeDims::Continuous {
                q: self.outcome.width(),
            },
            Outcome::MultiClass { .. } => OutcomeDims::MultiClass {
                m: self.outcome.width(),
            },
        };
        Dimensions {
            n_views: self.n_views(),
            n_subgroups: self.n_subgroups(),
            n_total: subgroup_sizes.iter().sum(),
            subgroup_sizes,
            view_sizes: self.view_sizes(),
            outcome,
        }
    }

    /// Checks every shape and labelling invariant of the dataset.
    pub fn validate(&self) -> Result<()> {
        let d = self.views.len();
        if d == 0 {
            return Err(HipError::InvalidInput("dataset has no views".into()));
        }
        let s = self.subgroup_names.len();
        if s == 0 {
            return Err(HipError::InvalidInput("dataset has no subgroups".into()));
        }
        for (name, got) in [
            ("gamma", self.gamma.len()),
            ("view_names", self.view_names.len()),
            ("variable_names", self.variable_names.len()),
        ] {
            if got != d {
                return Err(HipError::ShapeMismatch(format!(
                    "{name} has {got} entries for {d} views"
                )));
            }
        }
        let sizes: Vec<usize> = self.views[0].iter().map(|m| m.nrows()).collect();
        for (vi, blocks) in self.views.iter().enumerate() {
            if blocks.len() != s {
                return Err(HipError::ShapeMismatch(format!(
                    "view {vi} has {} subgroup blocks, expected {s}",
                    blocks.len()
                )));
            }
            let p = blocks[0].ncols();
            if p == 0 {
                return Err(HipError::InvalidInput(format!("view {vi} has no variables")));
            }
            if self.variable_names[vi].len() != p {
                return Err(HipError::ShapeMismatch(format!(
                    "view {vi} has {p} columns but {} variable names",
                    self.variable_names[vi].len()
                )));
            }
            for (si, m) in blocks.iter().enumerate() {
                if m.nrows() != sizes[si] || m.ncols() != p {
                    return Err(HipError::ShapeMismatch(format!(
                        "block ({vi},{si}) is {}x{}, expected {}x{p}",
                        m.nrows(),
                        m.ncols(),
                        sizes[si]
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(HipError::InvalidInput(format!(
                        "block ({vi},{si}) contains non-finite values"
                    )));
                }
            }
        }
        if sizes.contains(&0) {
            return Err(HipError::InvalidInput("empty subgroup".into()));
        }
        let ys = self.outcome.matrices();
        if ys.len() != s {
            return Err(HipError::ShapeMismatch(format!(
                "outcome has {} subgroups, expected {s}",
                ys.len()
            )));
        }
        let width = self.outcome.width();
        for (si, y) in ys.iter().enumerate() {
            if y.nrows() != sizes[si] || y.ncols() != width {
                return Err(HipError::ShapeMismatch(format!(
                    "outcome block {si} is {}x{}, expected {}x{width}",
                    y.nrows(),
                    y.ncols(),
                    sizes[si]
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(HipError::InvalidInput(format!(
                    "outcome block {si} contains non-finite values"
                )));
            }
        }
        match &self.outcome {
            Outcome::Continuous { .. } => {
                if width == 0 {
                    return Err(HipError::InvalidInput("continuous outcome has no columns".into()));
                }
            }
            Outcome::MultiClass { y } => {
                if width < 2 {
                    return Err(HipError::InvalidInput(
                        "multiclass outcome needs at least 2 classes".into(),
                    ));
                }
                for (si, m) in y.iter().enumerate() {
                    for (i, row) in m.outer_iter().enumerate() {
                        let ones = row.iter().filter(|&&v| v == 1.0).count();
                        let zeros = row.iter().filter(|&&v| v == 0.0).count();
                        if ones != 1 || ones + zeros != row.len() {
                            return Err(HipError::InvalidOneHot { subgroup: si, row: i });
                        }
                    }
                }
            }
        }
        if self.outcome_names.len() != width {
            return Err(HipError::ShapeMismatch(format!(
                "{} outcome names for {width} outcome columns",
                self.outcome_names.len()
            )));
        }
        Ok(())
    }

    /// `N x (p_1 + ... + p_D)` matrix stacking subgroups (in order) and views.
    pub fn concatenated(&self) -> Matrix {
        let sizes = self.subgroup_sizes();
        let n: usize = sizes.iter().sum();
        let total_p: usize = self.view_sizes().iter().sum();
        let mut out = Matrix::zeros((n, total_p));
        let mut row = 0;
        for (s, &ns) in sizes.iter().enumerate() {
            let mut col = 0;
            for blocks in &self.views {
                let m = &blocks[s];
                out.slice_mut(ndarray::s![row..row + ns, col..col + m.ncols()])
                    .assign(m);
                col += m.ncols();
            }
            row += ns;
        }
        out
    }

    /// Subset of rows per subgroup (indices may repeat).
    pub fn select_rows(&self, rows: &[Vec<usize>]) -> Result<Self> {
        if rows.len() != self.n_subgroups() {
            return Err(HipError::LengthMismatch {
                expected: self.n_subgroups(),
                got: rows.len(),
            });
        }
        let views = self
            .views
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .zip(rows)
                    .map(|(m, idx)| m.select(Axis(0), idx))
                    .collect()
            })
            .collect();
        let pick = |ys: &[Matrix]| -> Vec<Matrix> {
            ys.iter().zip(rows).map(|(m, idx)| m.select(Axis(0), idx)).collect()
        };
        let outcome = match &self.outcome {
            Outcome::Continuous { y, standardized } => Outcome::Continuous {
                y: pick(y),
                standardized: *standardized,
            },
            Outcome::MultiClass { y } => Outcome::MultiClass { y: pick(y) },
        };
        Self::with_names(
            views,
            outcome,
            self.gamma.clone(),
            self.view_names.clone(),
            self.variable_names.clone(),
            self.subgroup_names.clone(),
            self.outcome_names.clone(),
        )
    }
}

fn default_outcome_names(outcome: &Outcome) -> Vec<String> {
    match outcome {
        Outcome::Continuous { .. } => (0..outcome.width()).map(|j| format!("y{}", j + 1)).collect(),
        Outcome::MultiClass { .. } => (0..outcome.width()).map(|j| j.to_string()).collect(),
    }
}

/// Per-column centering and scaling captured from one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ColumnScaling {
    pub fn identity(p: usize) -> Self {
        ColumnScaling {
            mean: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    /// Sample mean and sample standard deviation (divisor `n - 1`) per column.
    /// Constant columns get scale 1; their indices are returned.
    pub fn fit(m: &Matrix) -> (Self, Vec<usize>) {
        let n = m.nrows();
        let mut mean = Vec::with_capacity(m.ncols());
        let mut scale = Vec::with_capacity(m.ncols());
        let mut constant = Vec::new();
        for (j, col) in m.columns().into_iter().enumerate() {
            let mu = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mu) * (v - mu)).sum();
            let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
            // relative test so that columns equal up to rounding count as constant
            let tiny = 1e-12 * col.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
            if sd <= tiny {
                constant.push(j);
                scale.push(1.0);
            } else {
                scale.push(sd);
            }
            mean.push(mu);
        }
        (ColumnScaling { mean, scale }, constant)
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (mu, sd) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| (v - mu) / sd);
        }
        out
    }

    pub fn invert(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (mu, sd) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| v * sd + mu);
        }
        out
    }
}

/// Transform captured at fit time so that new data can be put on the same scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// `views[d][s]`, present when the views were standardized per subgroup.
    pub views: Option<Vec<Vec<ColumnScaling>>>,
    /// Per-subgroup scaling of a continuous outcome.
    pub outcome: Option<Vec<ColumnScaling>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Standardizer {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn apply_views(&self, views: &[Vec<Matrix>]) -> Result<Vec<Vec<Matrix>>> {
        match &self.views {
            None => Ok(views.to_vec()),
            Some(sc) => {
                if sc.len() != views.len() {
                    return Err(HipError::ShapeMismatch(format!(
                        "standardizer has {} views, data has {}",
                        sc.len(),
                        views.len()
                    )));
                }
                views
                    .iter()
                    .zip(sc)
                    .map(|(blocks, scs)| {
                        if blocks.len() != scs.len() {
                            return Err(HipError::ShapeMismatch(
                                "subgroup count differs from the fitted standardizer".into(),
                            ));
                        }
                        blocks
                            .iter()
                            .zip(scs)
                            .map(|(m, c)| {
                                if m.ncols() != c.mean.len() {
                                    return Err(HipError::ShapeMismatch(format!(
                                        "block has {} columns, standardizer expects {}",
                                        m.ncols(),
                                        c.mean.len()
                                    )));
                                }
                                Ok(c.apply(m))
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }

    pub fn apply_outcome(&self, outcome: &Outcome) -> Result<Outcome> {
        match (outcome, &self.outcome) {
            (Outcome::Continuous { y, .. }, Some(sc)) => {
                if sc.len() != y.len() {
                    return Err(HipError::ShapeMismatch(
                        "outcome subgroup count differs from the fitted standardizer".into(),
                    ));
                }
                Ok(Outcome::Continuous {
                    y: y.iter().zip(sc).map(|(m, c)| c.apply(m)).collect(),
                    standardized: true,
                })
            }
            _ => Ok(outcome.clone()),
        }
    }

    /// Puts a dataset on the scale the model was fitted on.
    pub fn apply(&self, ds: &MultiViewDataset) -> Result<MultiViewDataset> {
        let mut out = ds.clone();
        out.views = self.apply_views(&ds.views)?;
        out.outcome = self.apply_outcome(&ds.outcome)?;
        Ok(out)
    }

    /// Maps a standardized outcome block of subgroup `s` back to original units.
    pub fn destandardize_outcome(&self, s: usize, y: &Matrix) -> Matrix {
        match &self.outcome {
            Some(sc) => sc[s].invert(y),
            None => y.clone(),
        }
    }

    /// Inverse of [`Standardizer::apply`].
    pub fn destandardize(&self, ds: &MultiViewDataset) -> MultiViewDataset {
        let mut out = ds.clone();
        if let Some(sc) = &self.views {
            out.views = ds
                .views
                .iter()
                .zip(sc)
                .map(|(blocks, scs)| blocks.iter().zip(scs).map(|(m, c)| c.invert(m)).collect())
                .collect();
        }
        if let (Outcome::Continuous { y, .. }, Some(sc)) = (&ds.outcome, &self.outcome) {
            out.outcome = Outcome::Continuous {
                y: y.iter().zip(sc).map(|(m, c)| c.invert(m)).collect(),
                standardized: false,
            };
        }
        out
    }
}

/// Standardizes a continuous outcome per subgroup and, when `per_subgroup`
/// is set, every view column within each subgroup as well.
///
/// Constant columns are centered and keep scale 1; a warning is recorded
/// in the returned [`Standardizer`].
pub fn standardize(ds: &MultiViewDataset, per_subgroup: bool) -> (MultiViewDataset, Standardizer) {
    let mut warnings = Vec::new();
    let views = if per_subgroup {
        let sc: Vec<Vec<ColumnScaling>> = ds
            .views
            .iter()
            .enumerate()
            .map(|(d, blocks)| {
                blocks
                    .iter()
                    .enumerate()
                    .map(|(s, m)| {
                        let (c, constant) = ColumnScaling::fit(m);
                        for j in constant {
                            warnings.push(format!(
                                "constant column '{}' in view '{}', subgroup '{}' left centered only",
                                ds.variable_names[d][j], ds.view_names[d], ds.subgroup_names[s]
                            ));
                        }
                        c
                    })
                    .collect()
            })
            .collect();
        Some(sc)
    } else {
        None
    };
    let outcome = match &ds.outcome {
        Outcome::Continuous { y, .. } => Some(
            y.iter()
                .enumerate()
                .map(|(s, m)| {
                    let (c, constant) = ColumnScaling::fit(m);
                    for j in constant {
                        warnings.push(format!(
                            "constant outcome column '{}' in subgroup '{}' left centered only",
                            ds.outcome_names[j], ds.subgroup_names[s]
                        ));
                    }
                    c
                })
                .collect(),
        ),
        Outcome::MultiClass { .. } => None,
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let st = Standardizer {
        views,
        outcome,
        warnings,
    };
    let out = st.apply(ds).expect("standardizer built from this dataset");
    (out, st)
}

/// Prediction-time ridge added to `B_cat^T B_cat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Ridge {
    /// Multiple of `trace(B_cat^T B_cat) / K`.
    Relative(f64),
    Absolute(f64),
}

impl Ridge {
    pub fn resolve(&self, gram_trace: f64, k: usize) -> f64 {
        match *self {
            Ridge::Relative(c) => c * gram_trace / k.max(1) as f64,
            Ridge::Absolute(v) => v,
        }
    }
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lambda_g: f64,
    pub lambda_xi: f64,
    pub k: usize,
    pub eps_outer: f64,
    pub eps_inner: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub ridge: Ridge,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lambda_g: 0.0,
            lambda_xi: 0.0,
            k: 2,
            eps_outer: 1e-6,
            eps_inner: 1e-6,
            max_outer_iters: 500,
            max_inner_iters: 1000,
            ridge: Ridge::default(),
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HipError::InvalidInput(msg.to_string()));
        if !(self.lambda_g >= 0.0 && self.lambda_g.is_finite()) {
            return bad("lambda_g must be a nonnegative finite number");
        }
        if !(self.lambda_xi >= 0.0 && self.lambda_xi.is_finite()) {
            return bad("lambda_xi must be a nonnegative finite number");
        }
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if !(self.eps_outer > 0.0 && self.eps_inner > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return bad("iteration caps must be at least 1");
        }
        let r = match self.ridge {
            Ridge::Relative(v) | Ridge::Absolute(v) => v,
        };
        if !(r >= 0.0 && r.is_finite()) {
            return bad("ridge must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    /// Prediction loss plus reconstruction loss.
    pub unpenalized: f64,
    pub penalty: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub records: Vec<LossRecord>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitStatus {
    /// Model straight out of initialization.
    Initialized,
    Converged { iterations: usize },
    MaxIterations,
    /// The unpenalized objective rose by more than 1% in `iteration`.
    Diverged { iteration: usize },
}

impl FitStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, FitStatus::Converged { .. })
    }
}

/// Fitted loadings, scores and outcome coefficients.
///
/// The combined loadings `B^{d,s} = G^d * Xi^{d,s}` (element-wise) are kept
/// in sync by the setters; there is no way to modify `G`, `Xi` or `B`
/// independently.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    g: Vec<Matrix>,
    xi: Vec<Vec<Matrix>>,
    b: Vec<Vec<Matrix>>,
    /// `n_s x K` scores per subgroup.
    pub z: Vec<Matrix>,
    /// `K x q` or `K x m`, shared by all subgroups.
    pub theta: Matrix,
    pub outcome_kind: OutcomeKind,
    pub hyper: Hyperparameters,
    pub standardizer: Standardizer,
    pub trace: LossTrace,
    pub status: FitStatus,
    /// Count of inner solves that hit `max_inner_iters`.
    pub inner_nonconverged: usize,
    pub diagnostics: Vec<String>,
}

impl FactorModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g: Vec<Matrix>,
        xi: Vec<Vec<Matrix>>,
        z: Vec<Matrix>,
        theta: Matrix,
        outcome_kind: OutcomeKind,
        hyper: Hyperparameters,
        standardizer: Standardizer,
    ) -> Result<Self> {
        if g.len() != xi.len() {
            return Err(HipError::ShapeMismatch(format!(
                "{} G matrices but {} Xi view entries",
                g.len(),
                xi.len()
            )));
        }
        let k = theta.nrows();
        for (d, gd) in g.iter().enumerate() {
            if gd.ncols() != k {
                return Err(HipError::ShapeMismatch(format!("G^{d} has {} columns, K = {k}", gd.ncols())));
            }
            if xi[d].len() != z.len() {
                return Err(HipError::ShapeMismatch(format!(
                    "view {d} has {} Xi blocks for {} subgroups",
                    xi[d].len(),
                    z.len()
                )));
            }
            for x in &xi[d] {
                if x.dim() != gd.dim() {
                    return Err(HipError::ShapeMismatch(format!(
                        "Xi block {:?} does not match G^{d} {:?}",
                        x.dim(),
                        gd.dim()
                    )));
                }
            }
        }
        for zs in &z {
            if zs.ncols() != k {
                return Err(HipError::ShapeMismatch(format!("Z has {} columns, K = {k}", zs.ncols())));
            }
        }
        let b = g
            .iter()
            .zip(&xi)
            .map(|(gd, xis)| xis.iter().map(|x| gd * x).collect())
            .collect();
        Ok(FactorModel {
            g,
            xi,
            b,
            z,
            theta,
            outcome_kind,
            hyper,
            standardizer,
            trace: LossTrace::default(),
            status: FitStatus::Initialized,
            inner_nonconverged: 0,
            diagnostics: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_views(&self) -> usize {
        self.g.len()
    }

    pub fn n_subgroups(&self) -> usize {
        self.z.len()
    }

    pub fn view_sizes(&self) -> Vec<usize> {
        self.g.iter().map(|g| g.nrows()).collect()
    }

    pub fn g(&self, d: usize) -> &Matrix {
        &self.g[d]
    }

    pub fn xi(&self, d: usize, s: usize) -> &Matrix {
        &self.xi[d][s]
    }

    pub fn b(&self, d: usize, s: usize) -> &Matrix {
        &self.b[d][s]
    }

    pub fn g_all(&self) -> &[Matrix] {
        &self.g
    }

    pub fn xi_all(&self) -> &[Vec<Matrix>] {
        &self.xi
    }

    pub fn b_all(&self) -> &[Vec<Matrix>] {
        &self.b
    }

    pub fn set_g(&mut self, d: usize, g: Matrix) {
        assert_eq!(g.dim(), self.g[d].dim(), "G^{d} shape is fixed");
        for (s, x) in self.xi[d].iter().enumerate() {
            self.b[d][s] = &g * x;
        }
        self.g[d] = g;
    }

    pub fn set_xi(&mut self, d: usize, s: usize, xi: Matrix) {
        assert_eq!(xi.dim(), self.xi[d][s].dim(), "Xi^{{{d},{s}}} shape is fixed");
        self.b[d][s] = &self.g[d] * &xi;
        self.xi[d][s] = xi;
    }

    /// `sum_{k} |B_lk|` for every row of `B^{d,s}`.
    pub fn row_weights(&self, d: usize, s: usize) -> Vec<f64> {
        self.b[d][s]
            .outer_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum())
            .collect()
    }
}

/// A selected variable: its column index, label and loading weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedVariable {
    pub index: usize,
    pub name: String,
    pub weight: f64,
    pub times_selected: usize,
}

/// Selected variables per `(view, subgroup)`.
///
/// Single-fit reports list variables by column index, bootstrap reports by
/// selection count (descending, then index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub view_names: Vec<String>,
    pub subgroup_names: Vec<String>,
    /// `selected[d][s]`.
    pub selected: Vec<Vec<Vec<SelectedVariable>>>,
    /// Number of fits the counts are taken over.
    pub n_fits: usize,
}

impl SelectionReport {
    /// Support of every `B^{d,s}` of one fitted model.
    pub fn from_model(model: &FactorModel, ds: &MultiViewDataset, zero_tol: f64) -> Self {
        let selected = (0..model.n_views())
            .map(|d| {
                (0..model.n_subgroups())
                    .map(|s| {
                        let w = model.row_weights(d, s);
                        crate::penalty::support(model.b(d, s), zero_tol)
                            .into_iter()
                            .map(|l| SelectedVariable {
                                index: l,
                                name: ds.variable_names[d][l].clone(),
                                weight: w[l],
                                times_selected: 1,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        SelectionReport {
            view_names: ds.view_names.clone(),
            subgroup_names: ds.subgroup_names.clone(),
            selected,
            n_fits: 1,
        }
    }

    /// Sorted column indices of the variables selected in block `(d, s)`.
    pub fn indices(&self, d: usize, s: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self.selected[d][s].iter().map(|v| v.index).collect();
        idx.sort_unstable();
        idx
    }

    /// Variables of view `d` selected in every subgroup.
    pub fn common(&self, d: usize) -> Vec<usize> {
        let mut common = self.indices(d, 0);
        for s in 1..self.selected[d].len() {
            let other = self.indices(d, s);
            common.retain(|i| other.binary_search(i).is_ok());
        }
        common
    }

    /// Variables selected for subgroup `s` but not in every subgroup.
    pub fn subgroup_specific(&self, d: usize, s: usize) -> Vec<usize> {
        let common = self.common(d);
        self.indices(d, s)
            .into_iter()
            .filter(|i| common.binary_search(i).is_err())
            .collect()
    }

    /// Total count of selected rows over all blocks.
    pub fn total_selected(&self) -> usize {
        self.selected.iter().flatten().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small() -> MultiViewDataset {
        let x1 = array![[1.0, 2.0], [2.0, 4.0], [3.0, 7.0]];
        let x2 = array![[0.5, 1.0], [1.5, 0.0]];
        let y = Outcome::Continuous {
            y: vec![array![[1.0], [2.0], [3.0]], array![[4.0], [6.0]]],
            standardized: false,
        };
        MultiViewDataset::new(vec![vec![x1, x2]], y).unwrap()
    }

    #[test]
    fn standardize_outcome_uses_sample_sd() {
        let (st, _) = standardize(&small(), false);
        let y = &st.outcome.matrices()[0];
        assert!((y[[0, 0]] + 1.0).abs() < 1e-12);
        assert!(y[[1, 0]].abs() < 1e-12);
        assert!((y[[2, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_is_idempotent() {
        let (once, _) = standardize(&small(), true);
        let (twice, _) = standardize(&once, true);
        for (a, b) in once.views[0].iter().zip(&twice.views[0]) {
            assert!((a - b).iter().all(|v| v.abs() < 1e-8));
        }
    }

    #[test]
    fn constant_column_is_centered_with_unit_scale() {
        let x = array![[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]];
        let y = Outcome::Continuous {
            y: vec![array![[1.0], [2.0], [3.0]]],
            standardized: false,
        };
        let ds = MultiViewDataset::new(vec![vec![x]], y).unwrap();
        let (out, st) = standardize(&ds, true);
        assert!(out.views[0][0].column(0).iter().all(|&v| v == 0.0));
        assert_eq!(st.views.as_ref().unwrap()[0][0].scale[0], 1.0);
        assert_eq!(st.warnings.len(), 1);
    }

    #[test]
    fn destandardize_round_trips() {
        let ds = small();
        let (out, st) = standardize(&ds, true);
        let back = st.destandardize(&out);
        for (a, b) in ds.views[0].iter().zip(&back.views[0]) {
            assert!((a - b).iter().all(|v| v.abs() < 1e-10));
        }
        let (ya, yb) = (ds.outcome.matrices(), back.outcome.matrices());
        for (a, b) in ya.iter().zip(yb) {
            assert!((a - b).iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn rejects_bad_one_hot() {
        let x = array![[1.0], [2.0]];
        let y = Outcome::MultiClass {
            y: vec![array![[1.0, 1.0], [0.0, 1.0]]],
        };
        let err = MultiViewDataset::new(vec![vec![x]], y).unwrap_err();
        assert!(matches!(err, HipError::InvalidOneHot { subgroup: 0, row: 0 }));
    }

    #[test]
    fn rejects_row_mismatch() {
        let y = Outcome::Continuous {
            y: vec![array![[1.0], [2.0]]],
            standardized: false,
        };
        let err = MultiViewDataset::new(vec![vec![array![[1.0, 2.0]]]], y).unwrap_err();
        assert!(matches!(err, HipError::ShapeMismatch(_)));
    }

    #[test]
    fn b_tracks_g_and_xi() {
        let g = vec![array![[2.0, 3.0], [1.0, 1.0]]];
        let xi = vec![vec![array![[0.0, 1.0], [1.0, -2.0]]]];
        let mut m = FactorModel::new(
            g,
            xi,
            vec![Matrix::zeros((3, 2))],
            Matrix::zeros((2, 1)),
            OutcomeKind::Continuous,
            Hyperparameters::default(),
            Standardizer::identity(),
        )
        .unwrap();
        assert_eq!(m.b(0, 0), &array![[0.0, 3.0], [1.0, -2.0]]);
        m.set_g(0, array![[1.0, 1.0], [0.0, 0.0]]);
        assert_eq!(m.b(0, 0), &array![[0.0, 1.0], [0.0, 0.0]]);
        m.set_xi(0, 0, Matrix::ones((2, 2)));
        assert_eq!(m.b(0, 0), m.g(0));
    }

    #[test]
    fn concatenated_stacks_subgroups_then_views() {
        let ds = small();
        let c = ds.concatenated();
        assert_eq!(c.dim(), (5, 2));
        assert_eq!(c[[3, 0]], 0.5);
    }
}
