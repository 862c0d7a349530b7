//! Python bindings. Matrices cross the boundary as lists of row lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hip::prediction::PredictedOutcome;
use hip::selection::{
    bootstrap_stability, scree, search_lambda, select_k_from_spectrum, BootstrapOptions, EigenProxy, LambdaGrid,
};
use hip::simulation::{generate_dataset, LabelRule, Overlap, Setting, SignalSets, SimScenario};
use hip::{FactorModel, FitOptions, HipError, Matrix, MultiViewDataset, Outcome, OutcomeKind, SelectionReport, ZERO_TOL};

type Rows = Vec<Vec<f64>>;
/// `(index, times_selected, weight)` per view and subgroup.
type Stability = Vec<Vec<Vec<(usize, usize, f64)>>>;

fn err(e: HipError) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_rows(m: &Matrix) -> Rows {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &Rows) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("ragged matrix: rows differ in length"));
    }
    Ok(Matrix::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j]))
}

fn check_index(i: usize, n: usize, what: &str) -> PyResult<()> {
    if i < n {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!("{what} index {i} out of range (0..{n})")))
    }
}

/// Views and outcome of several subgroups.
#[pyclass(name = "Dataset", module = "hip", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: MultiViewDataset,
}

#[pymethods]
impl PyDataset {
    /// `views[d][s]` is an `n_s x p_d` matrix. Give either `y` (one matrix
    /// per subgroup) or `labels` (class indices per subgroup) with `n_classes`.
    #[new]
    #[pyo3(signature = (views, y=None, labels=None, n_classes=None, gamma=None))]
    fn new(
        views: Vec<Vec<Rows>>,
        y: Option<Vec<Rows>>,
        labels: Option<Vec<Vec<usize>>>,
        n_classes: Option<usize>,
        gamma: Option<Vec<bool>>,
    ) -> PyResult<Self> {
        let views = views
            .iter()
            .map(|blocks| blocks.iter().map(from_rows).collect::<PyResult<Vec<_>>>())
            .collect::<PyResult<Vec<_>>>()?;
        let outcome = match (y, labels) {
            (Some(y), None) => Outcome::Continuous {
                y: y.iter().map(from_rows).collect::<PyResult<_>>()?,
                standardized: false,
            },
            (None, Some(l)) => {
                let m = n_classes.unwrap_or_else(|| l.iter().flatten().max().map_or(0, |&c| c + 1));
                Outcome::from_labels(&l, m).map_err(err)?
            }
            _ => return Err(PyValueError::new_err("give exactly one of y or labels")),
        };
        let mut ds = MultiViewDataset::new(views, outcome).map_err(err)?;
        if let Some(g) = gamma {
            ds = ds.with_gamma(g).map_err(err)?;
        }
        Ok(PyDataset { inner: ds })
    }

    /// Reads a dataset manifest and its CSV files.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: hip::io::load_dataset(&path).map_err(err)?,
        })
    }

    /// Writes the dataset to `dir`; returns the manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<String> {
        let p = hip::io::save_dataset(&self.inner, &dir).map_err(err)?;
        Ok(p.display().to_string())
    }

    #[getter]
    fn n_views(&self) -> usize {
        self.inner.n_views()
    }

    #[getter]
    fn n_subgroups(&self) -> usize {
        self.inner.n_subgroups()
    }

    #[getter]
    fn view_sizes(&self) -> Vec<usize> {
        self.inner.view_sizes()
    }

    #[getter]
    fn subgroup_sizes(&self) -> Vec<usize> {
        self.inner.subgroup_sizes()
    }

    #[getter]
    fn outcome_kind(&self) -> &'static str {
        match self.inner.outcome.kind() {
            OutcomeKind::Continuous => "continuous",
            OutcomeKind::Multiclass => "multiclass",
        }
    }

    fn view(&self, d: usize, s: usize) -> PyResult<Rows> {
        check_index(d, self.inner.n_views(), "view")?;
        check_index(s, self.inner.n_subgroups(), "subgroup")?;
        Ok(to_rows(&self.inner.views[d][s]))
    }

    fn outcome(&self, s: usize) -> PyResult<Rows> {
        check_index(s, self.inner.n_subgroups(), "subgroup")?;
        Ok(to_rows(&self.inner.outcome.matrices()[s]))
    }

    /// Class labels per subgroup, or `None` for a continuous outcome.
    fn labels(&self) -> Option<Vec<Vec<usize>>> {
        self.inner.outcome.labels()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(views={:?}, subgroups={:?}, outcome={})",
            self.view_sizes(),
            self.subgroup_sizes(),
            self.outcome_kind()
        )
    }
}

/// A fitted model.
#[pyclass(name = "Model", module = "hip", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: FactorModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.status.is_converged()
    }

    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.inner.status)
    }

    #[getter]
    fn lambdas(&self) -> (f64, f64) {
        (self.inner.hyper.lambda_g, self.inner.hyper.lambda_xi)
    }

    fn g(&self, d: usize) -> PyResult<Rows> {
        check_index(d, self.inner.n_views(), "view")?;
        Ok(to_rows(self.inner.g(d)))
    }

    fn xi(&self, d: usize, s: usize) -> PyResult<Rows> {
        check_index(d, self.inner.n_views(), "view")?;
        check_index(s, self.inner.n_subgroups(), "subgroup")?;
        Ok(to_rows(self.inner.xi(d, s)))
    }

    fn b(&self, d: usize, s: usize) -> PyResult<Rows> {
        check_index(d, self.inner.n_views(), "view")?;
        check_index(s, self.inner.n_subgroups(), "subgroup")?;
        Ok(to_rows(self.inner.b(d, s)))
    }

    fn z(&self, s: usize) -> PyResult<Rows> {
        check_index(s, self.inner.n_subgroups(), "subgroup")?;
        Ok(to_rows(&self.inner.z[s]))
    }

    fn theta(&self) -> Rows {
        to_rows(&self.inner.theta)
    }

    /// Sorted indices of the nonzero rows of `B^{d,s}`.
    fn selected(&self, d: usize, s: usize) -> PyResult<Vec<usize>> {
        check_index(d, self.inner.n_views(), "view")?;
        check_index(s, self.inner.n_subgroups(), "subgroup")?;
        Ok(hip::penalty::support(self.inner.b(d, s), ZERO_TOL))
    }

    /// `(unpenalized, penalty, total)` per outer iteration.
    fn loss_trace(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .trace
            .records
            .iter()
            .map(|r| (r.unpenalized, r.penalty, r.total))
            .collect()
    }

    /// Dict with `z` and either `y` (original units) and `y_standardized`,
    /// or `labels` and `probabilities`; each is a list over subgroups.
    fn predict<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Bound<'py, PyDict>> {
        let pred = hip::prediction::predict(&self.inner, &data.inner).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("z", pred.z.iter().map(to_rows).collect::<Vec<_>>())?;
        match &pred.outcome {
            PredictedOutcome::Continuous { standardized, original } => {
                out.set_item("y", original.iter().map(to_rows).collect::<Vec<_>>())?;
                out.set_item("y_standardized", standardized.iter().map(to_rows).collect::<Vec<_>>())?;
            }
            PredictedOutcome::MultiClass { probabilities, labels } => {
                out.set_item("labels", labels.clone())?;
                out.set_item("probabilities", probabilities.iter().map(to_rows).collect::<Vec<_>>())?;
            }
        }
        Ok(out)
    }

    /// `data`'s continuous outcome on the scale the model was fitted on.
    fn standardized_outcome(&self, data: &PyDataset) -> PyResult<Vec<Rows>> {
        let o = self.inner.standardizer.apply_outcome(&data.inner.outcome).map_err(err)?;
        Ok(o.matrices().iter().map(to_rows).collect())
    }

    fn to_json(&self) -> PyResult<String> {
        hip::io::model_to_json(&self.inner).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: hip::io::model_from_json(text).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        hip::io::save_model(&self.inner, &path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: hip::io::load_model(&path).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(k={}, lambda_g={}, lambda_xi={}, status={})",
            self.k(),
            self.inner.hyper.lambda_g,
            self.inner.hyper.lambda_xi,
            self.status()
        )
    }
}

fn fit_options(k: usize, lambda_g: f64, lambda_xi: f64, standardize_x: bool, seed: u64, max_outer_iters: usize) -> FitOptions {
    let mut o = FitOptions::default().with_lambdas(lambda_g, lambda_xi).with_k(k);
    o.standardize_x = standardize_x;
    o.seed = seed;
    o.hyper.max_outer_iters = max_outer_iters;
    o
}

/// Fits at fixed penalties.
#[pyfunction]
#[pyo3(signature = (data, k=2, lambda_g=0.0, lambda_xi=0.0, standardize_x=true, seed=0, max_outer_iters=500))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: &PyDataset,
    k: usize,
    lambda_g: f64,
    lambda_xi: f64,
    standardize_x: bool,
    seed: u64,
    max_outer_iters: usize,
) -> PyResult<PyModel> {
    let opts = fit_options(k, lambda_g, lambda_xi, standardize_x, seed, max_outer_iters);
    let ds = &data.inner;
    let model = py.detach(|| hip::fit(ds, &opts)).map_err(err)?;
    Ok(PyModel { inner: model })
}

fn grid(mode: &str, steps: usize, lambda_max: f64, fraction: f64, seed: u64) -> PyResult<LambdaGrid> {
    match mode {
        "random" => LambdaGrid::random(steps, lambda_max, fraction, seed).map_err(err),
        "grid" => LambdaGrid::full(steps, lambda_max).map_err(err),
        other => Err(PyValueError::new_err(format!("mode '{other}' is not one of random, grid"))),
    }
}

/// Lambda search by BIC. Returns the best model and one dict per candidate.
#[pyfunction]
#[pyo3(signature = (data, k=2, mode="random", steps=8, lambda_max=1.0, fraction=0.15, standardize_x=true, seed=0, max_outer_iters=500))]
#[allow(clippy::too_many_arguments)]
fn tune<'py>(
    py: Python<'py>,
    data: &PyDataset,
    k: usize,
    mode: &str,
    steps: usize,
    lambda_max: f64,
    fraction: f64,
    standardize_x: bool,
    seed: u64,
    max_outer_iters: usize,
) -> PyResult<(PyModel, Vec<Bound<'py, PyDict>>)> {
    let g = grid(mode, steps, lambda_max, fraction, seed)?;
    let opts = fit_options(k, 0.0, 0.0, standardize_x, seed, max_outer_iters);
    let ds = &data.inner;
    let res = py.detach(|| search_lambda(ds, k, &g, &opts)).map_err(err)?;
    let mut table = Vec::with_capacity(res.records.len());
    for r in &res.records {
        let d = PyDict::new(py);
        d.set_item("lambda_g", r.lambda_g)?;
        d.set_item("lambda_xi", r.lambda_xi)?;
        d.set_item("bic", r.bic)?;
        d.set_item("nonzero_rows", r.lambda_b)?;
        d.set_item("unpenalized", r.unpenalized)?;
        d.set_item("converged", r.converged)?;
        table.push(d);
    }
    Ok((PyModel { inner: res.best_model }, table))
}

fn proxy(eigen: &str) -> PyResult<EigenProxy> {
    match eigen {
        "singular" => Ok(EigenProxy::Singular),
        "squared" => Ok(EigenProxy::Squared),
        other => Err(PyValueError::new_err(format!("eigen '{other}' is not one of singular, squared"))),
    }
}

/// Number of components by the relative eigenvalue-drop rule.
#[pyfunction]
#[pyo3(signature = (data, threshold=0.10, use_raw=false, eigen="singular"))]
fn select_k(data: &PyDataset, threshold: f64, use_raw: bool, eigen: &str) -> PyResult<usize> {
    hip::selection::select_k_simple(&data.inner, threshold, use_raw, proxy(eigen)?).map_err(err)
}

/// Decreasing spectrum used by `select_k`.
#[pyfunction]
#[pyo3(signature = (data, use_raw=false, eigen="singular"))]
fn spectrum(data: &PyDataset, use_raw: bool, eigen: &str) -> PyResult<Vec<f64>> {
    Ok(scree(&data.inner, use_raw, proxy(eigen)?))
}

#[pyfunction]
fn k_from_spectrum(eigenvalues: Vec<f64>, threshold: f64) -> usize {
    select_k_from_spectrum(&eigenvalues, threshold)
}

/// Bootstrap stability selection at fixed penalties. Returns, per view and
/// subgroup, a list of `(index, times_selected, weight)`.
#[pyfunction]
#[pyo3(signature = (data, k=2, lambda_g=0.0, lambda_xi=0.0, n_boot=50, top_fraction=0.1, standardize_x=true, seed=0))]
#[allow(clippy::too_many_arguments)]
fn bootstrap(
    py: Python<'_>,
    data: &PyDataset,
    k: usize,
    lambda_g: f64,
    lambda_xi: f64,
    n_boot: usize,
    top_fraction: f64,
    standardize_x: bool,
    seed: u64,
) -> PyResult<Stability> {
    let ds = &data.inner;
    let boot = BootstrapOptions {
        n_boot,
        top_fraction: vec![top_fraction; ds.n_views()],
        grid: None,
        seed,
    };
    let opts = fit_options(k, lambda_g, lambda_xi, standardize_x, seed, 500);
    let res = py.detach(|| bootstrap_stability(ds, &boot, &opts)).map_err(err)?;
    Ok(res
        .report
        .selected
        .iter()
        .map(|per_sub| {
            per_sub
                .iter()
                .map(|vars| vars.iter().map(|v| (v.index, v.times_selected, v.weight)).collect())
                .collect()
        })
        .collect())
}

/// Synthetic train/test pair. Returns `(train, test, signal)` where
/// `signal[d][s]` lists the true nonzero rows of `B^{d,s}`.
#[pyfunction]
#[pyo3(signature = (scenario="full", setting="p1", outcome="continuous", seed=0, p=None, n=None, n_signal=None, sigma_x=None, sigma_y=None, label_rule="argmax"))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    scenario: &str,
    setting: &str,
    outcome: &str,
    seed: u64,
    p: Option<Vec<usize>>,
    n: Option<Vec<usize>>,
    n_signal: Option<usize>,
    sigma_x: Option<f64>,
    sigma_y: Option<f64>,
    label_rule: &str,
) -> PyResult<(PyDataset, PyDataset, SignalSets)> {
    let overlap = match scenario {
        "full" => Overlap::Full,
        "partial" => Overlap::Partial,
        o => return Err(PyValueError::new_err(format!("scenario '{o}' is not one of full, partial"))),
    };
    let setting = match (setting, p) {
        ("p1", None) => Setting::P1,
        ("p2", None) => Setting::P2,
        ("p3", None) => Setting::P3,
        ("custom", Some(p)) => Setting::Custom(p),
        _ => return Err(PyValueError::new_err("setting must be p1, p2, p3, or custom together with p")),
    };
    let kind = match outcome {
        "continuous" => OutcomeKind::Continuous,
        "multiclass" => OutcomeKind::Multiclass,
        o => return Err(PyValueError::new_err(format!("outcome '{o}' is not one of continuous, multiclass"))),
    };
    let mut sc = SimScenario::new(overlap, setting, kind, seed);
    sc.label_rule = match label_rule {
        "argmax" => LabelRule::Argmax,
        "sample" => LabelRule::Sample,
        o => return Err(PyValueError::new_err(format!("label_rule '{o}' is not one of argmax, sample"))),
    };
    if let Some(n) = n {
        sc.subgroup_sizes = n;
    }
    if let Some(v) = n_signal {
        sc.n_signal = v;
    }
    if let Some(v) = sigma_x {
        sc.sigma_x = v;
    }
    if let Some(v) = sigma_y {
        sc.sigma_y = v;
    }
    let (train, test, truth) = generate_dataset(&sc).map_err(err)?;
    Ok((PyDataset { inner: train }, PyDataset { inner: test }, truth.signal))
}

/// TPR, FPR and F1 of a selected index set against the truth among `p` variables.
#[pyfunction]
fn score_selection<'py>(py: Python<'py>, selected: Vec<usize>, truth: Vec<usize>, p: usize) -> PyResult<Bound<'py, PyDict>> {
    let s = hip::metrics::score_selection(&selected, &truth, p).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tpr", s.tpr)?;
    d.set_item("fpr", s.fpr)?;
    d.set_item("f1", s.f1)?;
    d.set_item("tp", s.tp)?;
    d.set_item("fp", s.fp)?;
    d.set_item("tn", s.tn)?;
    d.set_item("fn", s.fn_)?;
    Ok(d)
}

#[pyfunction]
fn test_mse(pred: Rows, obs: Rows) -> PyResult<f64> {
    hip::metrics::test_mse(&from_rows(&pred)?, &from_rows(&obs)?).map_err(err)
}

#[pyfunction]
fn accuracy(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    hip::metrics::accuracy(&pred, &truth).map_err(err)
}

/// Selected variables of a model as `{(view, subgroup): [names]}`.
#[pyfunction]
fn selection_report(model: &PyModel, data: &PyDataset) -> Vec<((String, String), Vec<String>)> {
    let r = SelectionReport::from_model(&model.inner, &data.inner, ZERO_TOL);
    let mut out = Vec::new();
    for (d, per_sub) in r.selected.iter().enumerate() {
        for (s, vars) in per_sub.iter().enumerate() {
            out.push((
                (r.view_names[d].clone(), r.subgroup_names[s].clone()),
                vars.iter().map(|v| v.name.clone()).collect(),
            ));
        }
    }
    out
}

#[pymodule(name = "hip")]
fn hip_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(k_from_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(score_selection, m)?)?;
    m.add_function(wrap_pyfunction!(test_mse, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(selection_report, m)?)?;
    Ok(())
}
