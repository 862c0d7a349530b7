//! Reading and writing datasets, models and result tables.
//!
//! A dataset on disk is a JSON manifest plus one CSV per `(view, subgroup)`
//! block and one outcome CSV per subgroup. Paths in the manifest are
//! relative to the manifest's directory. Every CSV has a header row.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data_model::{
    FactorModel, FitStatus, Hyperparameters, LossTrace, Matrix, MultiViewDataset, Outcome, OutcomeKind,
    SelectionReport, Standardizer,
};
use crate::error::{HipError, Result};
use crate::prediction::{PredictedOutcome, PredictionResult};
use crate::selection::BicRecord;

pub const MODEL_FORMAT: &str = "hip-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub name: String,
    #[serde(default = "yes")]
    pub gamma: bool,
    /// One CSV per subgroup, in subgroup order.
    pub files: Vec<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    #[serde(rename = "type")]
    pub kind: OutcomeKind,
    pub files: Vec<String>,
    /// Class labels of a multiclass outcome; the CSVs hold indices into this list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    /// A continuous outcome already standardized per subgroup.
    #[serde(default)]
    pub standardized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subgroups: Vec<String>,
    pub views: Vec<ViewEntry>,
    pub outcome: OutcomeEntry,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HipError::io(path, e))
}

/// Writes `bytes`, creating parent directories as needed.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| HipError::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| HipError::io(path, e))
}

fn parse_err(path: &Path, msg: impl Into<String>) -> HipError {
    HipError::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let f = fs::File::open(path).map_err(|e| HipError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(f))
}

fn finish_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| HipError::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Reads a numeric CSV: header row of column names, then one row per sample.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let p = header.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != p {
            return Err(parse_err(path, format!("row {} has {} fields, header has {p}", i + 1, rec.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, format!("row {}: '{field}' is not a number", i + 1)))?;
            data.push(v);
        }
        n += 1;
    }
    let m = Matrix::from_shape_vec((n, p), data).expect("row lengths checked");
    Ok((header, m))
}

pub fn write_matrix_csv(path: &Path, header: &[String], m: &Matrix) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(HipError::LengthMismatch {
            expected: m.ncols(),
            got: header.len(),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in m.outer_iter() {
        w.write_record(row.iter().map(|&v| fmt(v)))?;
    }
    finish_csv(path, w)
}

fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let mut rdr = csv_reader(path)?;
    if rdr.headers()?.len() != 1 {
        return Err(parse_err(path, "label file must have exactly one column"));
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, format!("row {}: '{}' is not a class index", i + 1, &rec[0])))
        })
        .collect()
}

fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label"])?;
    for l in labels {
        w.write_record([l.to_string()])?;
    }
    finish_csv(path, w)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

/// Loads and validates the dataset described by a manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let man = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let n_sub = man.subgroups.len();
    let check_files = |what: &str, files: &[String]| {
        if files.len() != n_sub {
            Err(parse_err(
                manifest_path,
                format!("{what} lists {} files for {n_sub} subgroups", files.len()),
            ))
        } else {
            Ok(())
        }
    };

    let mut views = Vec::with_capacity(man.views.len());
    let mut variable_names = Vec::with_capacity(man.views.len());
    for v in &man.views {
        check_files(&format!("view '{}'", v.name), &v.files)?;
        let mut blocks = Vec::with_capacity(n_sub);
        let mut names: Option<Vec<String>> = None;
        for f in &v.files {
            let path = base.join(f);
            let (header, m) = read_matrix_csv(&path)?;
            match &names {
                Some(prev) if *prev != header => {
                    return Err(parse_err(&path, format!("column names differ across subgroups of view '{}'", v.name)))
                }
                _ => names = Some(header),
            }
            blocks.push(m);
        }
        views.push(blocks);
        variable_names.push(names.unwrap_or_default());
    }

    check_files("outcome", &man.outcome.files)?;
    let (outcome, outcome_names) = match man.outcome.kind {
        OutcomeKind::Continuous => {
            let mut y = Vec::with_capacity(n_sub);
            let mut names = Vec::new();
            for f in &man.outcome.files {
                let (header, m) = read_matrix_csv(&base.join(f))?;
                names = header;
                y.push(m);
            }
            (
                Outcome::Continuous {
                    y,
                    standardized: man.outcome.standardized,
                },
                names,
            )
        }
        OutcomeKind::Multiclass => {
            let classes = man
                .outcome
                .classes
                .clone()
                .ok_or_else(|| parse_err(manifest_path, "multiclass outcome needs a 'classes' list"))?;
            let labels = man
                .outcome
                .files
                .iter()
                .map(|f| read_labels_csv(&base.join(f)))
                .collect::<Result<Vec<_>>>()?;
            (Outcome::from_labels(&labels, classes.len())?, classes)
        }
    };

    MultiViewDataset::with_names(
        views,
        outcome,
        man.views.iter().map(|v| v.gamma).collect(),
        man.views.iter().map(|v| v.name.clone()).collect(),
        variable_names,
        man.subgroups.clone(),
        outcome_names,
    )
}

/// Writes every block as CSV into `dir` plus a manifest named `manifest.json`;
/// returns the manifest path.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    let mut views = Vec::with_capacity(ds.n_views());
    for (d, blocks) in ds.views.iter().enumerate() {
        let mut files = Vec::with_capacity(blocks.len());
        for (s, m) in blocks.iter().enumerate() {
            let name = format!("view{}_subgroup{}.csv", d + 1, s + 1);
            write_matrix_csv(&dir.join(&name), &ds.variable_names[d], m)?;
            files.push(name);
        }
        views.push(ViewEntry {
            name: ds.view_names[d].clone(),
            gamma: ds.gamma[d],
            files,
        });
    }
    let mut files = Vec::with_capacity(ds.n_subgroups());
    let (kind, classes, standardized) = match &ds.outcome {
        Outcome::Continuous { y, standardized } => {
            for (s, m) in y.iter().enumerate() {
                let name = format!("outcome_subgroup{}.csv", s + 1);
                write_matrix_csv(&dir.join(&name), &ds.outcome_names, m)?;
                files.push(name);
            }
            (OutcomeKind::Continuous, None, *standardized)
        }
        Outcome::MultiClass { .. } => {
            let labels = ds.outcome.labels().expect("multiclass");
            for (s, lab) in labels.iter().enumerate() {
                let name = format!("outcome_subgroup{}.csv", s + 1);
                write_labels_csv(&dir.join(&name), lab)?;
                files.push(name);
            }
            (OutcomeKind::Multiclass, Some(ds.outcome_names.clone()), false)
        }
    };
    let man = Manifest {
        subgroups: ds.subgroup_names.clone(),
        views,
        outcome: OutcomeEntry {
            kind,
            files,
            classes,
            standardized,
        },
    };
    let path = dir.join("manifest.json");
    write_json(&path, &man)?;
    Ok(path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows.len() * ncols);
    for r in rows {
        if r.len() != ncols {
            return Err(HipError::ShapeMismatch(format!("{what}: row of length {} where {ncols} expected", r.len())));
        }
        data.extend_from_slice(r);
    }
    Ok(Matrix::from_shape_vec((rows.len(), ncols), data).expect("lengths checked"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDimensions {
    pub k: usize,
    pub view_sizes: Vec<usize>,
    pub subgroup_sizes: Vec<usize>,
    pub outcome_width: usize,
}

/// On-disk form of a [`FactorModel`]; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub outcome_kind: OutcomeKind,
    pub dimensions: ModelDimensions,
    pub hyperparameters: Hyperparameters,
    pub status: FitStatus,
    pub standardizer: Standardizer,
    /// `g[d]`.
    pub g: Vec<Vec<Vec<f64>>>,
    /// `xi[d][s]`.
    pub xi: Vec<Vec<Vec<Vec<f64>>>>,
    /// `z[s]`.
    pub z: Vec<Vec<Vec<f64>>>,
    pub theta: Vec<Vec<f64>>,
    pub trace: LossTrace,
    pub inner_nonconverged: usize,
    pub diagnostics: Vec<String>,
}

impl ModelFile {
    pub fn from_model(model: &FactorModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            outcome_kind: model.outcome_kind,
            dimensions: ModelDimensions {
                k: model.k(),
                view_sizes: model.view_sizes(),
                subgroup_sizes: model.z.iter().map(|z| z.nrows()).collect(),
                outcome_width: model.theta.ncols(),
            },
            hyperparameters: model.hyper.clone(),
            status: model.status,
            standardizer: model.standardizer.clone(),
            g: model.g_all().iter().map(to_rows).collect(),
            xi: model.xi_all().iter().map(|v| v.iter().map(to_rows).collect()).collect(),
            z: model.z.iter().map(to_rows).collect(),
            theta: to_rows(&model.theta),
            trace: model.trace.clone(),
            inner_nonconverged: model.inner_nonconverged,
            diagnostics: model.diagnostics.clone(),
        }
    }

    pub fn into_model(self) -> Result<FactorModel> {
        if self.format != MODEL_FORMAT {
            return Err(HipError::InvalidInput(format!("not a model file (format '{}')", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(HipError::InvalidInput(format!("unsupported model version {}", self.version)));
        }
        let k = self.dimensions.k;
        let g = self.g.iter().map(|m| from_rows(m, k, "G")).collect::<Result<Vec<_>>>()?;
        let xi = self
            .xi
            .iter()
            .map(|v| v.iter().map(|m| from_rows(m, k, "Xi")).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let z = self.z.iter().map(|m| from_rows(m, k, "Z")).collect::<Result<Vec<_>>>()?;
        let theta = from_rows(&self.theta, self.dimensions.outcome_width, "Theta")?;
        let mut model = FactorModel::new(
            g,
            xi,
            z,
            theta,
            self.outcome_kind,
            self.hyperparameters,
            self.standardizer,
        )?;
        if model.view_sizes() != self.dimensions.view_sizes {
            return Err(HipError::ShapeMismatch("loading sizes disagree with the recorded dimensions".into()));
        }
        model.trace = self.trace;
        model.status = self.status;
        model.inner_nonconverged = self.inner_nonconverged;
        model.diagnostics = self.diagnostics;
        Ok(model)
    }
}

pub fn model_to_json(model: &FactorModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ModelFile::from_model(model))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<FactorModel> {
    serde_json::from_str::<ModelFile>(text)?.into_model()
}

pub fn save_model(model: &FactorModel, path: &Path) -> Result<()> {
    write_bytes(path, model_to_json(model)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<FactorModel> {
    let text = read_text(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    file.into_model()
}

/// Columns: view, subgroup, variable, times_selected, weight.
pub fn write_selection_csv(report: &SelectionReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["view", "subgroup", "variable", "times_selected", "weight"])?;
    for (d, per_sub) in report.selected.iter().enumerate() {
        for (s, vars) in per_sub.iter().enumerate() {
            for v in vars {
                w.write_record([
                    report.view_names[d].as_str(),
                    report.subgroup_names[s].as_str(),
                    v.name.as_str(),
                    &v.times_selected.to_string(),
                    &fmt(v.weight),
                ])?;
            }
        }
    }
    finish_csv(path, w)
}

/// True signal sets, one row per `(view, subgroup, variable)`.
pub fn write_truth_csv(signal: &[Vec<Vec<usize>>], ds: &MultiViewDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["view", "subgroup", "index", "variable"])?;
    for (d, per_sub) in signal.iter().enumerate() {
        for (s, idx) in per_sub.iter().enumerate() {
            for &l in idx {
                w.write_record([
                    ds.view_names[d].as_str(),
                    ds.subgroup_names[s].as_str(),
                    &l.to_string(),
                    ds.variable_names[d][l].as_str(),
                ])?;
            }
        }
    }
    finish_csv(path, w)
}

/// Reads a truth CSV into `signal[d][s]` (sorted), matching view and subgroup names against `ds`.
pub fn read_truth_csv(path: &Path, ds: &MultiViewDataset) -> Result<Vec<Vec<Vec<usize>>>> {
    let mut out = vec![vec![Vec::new(); ds.n_subgroups()]; ds.n_views()];
    let mut rdr = csv_reader(path)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(parse_err(path, format!("row {} is too short", i + 1)));
        }
        let d = ds
            .view_names
            .iter()
            .position(|v| v == &rec[0])
            .ok_or_else(|| parse_err(path, format!("unknown view '{}'", &rec[0])))?;
        let s = ds
            .subgroup_names
            .iter()
            .position(|v| v == &rec[1])
            .ok_or_else(|| parse_err(path, format!("unknown subgroup '{}'", &rec[1])))?;
        let l: usize = rec[2]
            .parse()
            .map_err(|_| parse_err(path, format!("row {}: bad index '{}'", i + 1, &rec[2])))?;
        if l >= ds.variable_names[d].len() {
            return Err(parse_err(path, format!("row {}: index {l} out of range", i + 1)));
        }
        out[d][s].push(l);
    }
    for per_sub in &mut out {
        for idx in per_sub {
            idx.sort_unstable();
            idx.dedup();
        }
    }
    Ok(out)
}

/// Reads the selection CSV back into `selected[d][s]` column indices.
pub fn read_selection_csv(path: &Path, ds: &MultiViewDataset) -> Result<Vec<Vec<Vec<usize>>>> {
    let mut out = vec![vec![Vec::new(); ds.n_subgroups()]; ds.n_views()];
    let mut rdr = csv_reader(path)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(parse_err(path, format!("row {} is too short", i + 1)));
        }
        let d = ds
            .view_names
            .iter()
            .position(|v| v == &rec[0])
            .ok_or_else(|| parse_err(path, format!("unknown view '{}'", &rec[0])))?;
        let s = ds
            .subgroup_names
            .iter()
            .position(|v| v == &rec[1])
            .ok_or_else(|| parse_err(path, format!("unknown subgroup '{}'", &rec[1])))?;
        let l = ds.variable_names[d]
            .iter()
            .position(|v| v == &rec[2])
            .ok_or_else(|| parse_err(path, format!("unknown variable '{}'", &rec[2])))?;
        out[d][s].push(l);
    }
    for per_sub in &mut out {
        for idx in per_sub {
            idx.sort_unstable();
            idx.dedup();
        }
    }
    Ok(out)
}

pub fn write_loss_trace_csv(trace: &LossTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "unpenalized", "penalty", "total"])?;
    for (i, r) in trace.records.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt(r.unpenalized), fmt(r.penalty), fmt(r.total)])?;
    }
    finish_csv(path, w)
}

pub fn write_bic_csv(records: &[BicRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "lambda_g", "lambda_xi", "bic", "nonzero_rows", "unpenalized", "status", "outer_iterations"])?;
    for r in records {
        let status = match r.status {
            FitStatus::Initialized => "initialized",
            FitStatus::Converged { .. } => "converged",
            FitStatus::MaxIterations => "max_iterations",
            FitStatus::Diverged { .. } => "diverged",
        };
        w.write_record([
            r.k.to_string(),
            fmt(r.lambda_g),
            fmt(r.lambda_xi),
            fmt(r.bic),
            r.lambda_b.to_string(),
            fmt(r.unpenalized),
            status.to_string(),
            r.outer_iterations.to_string(),
        ])?;
    }
    finish_csv(path, w)
}

/// One row per test sample: subgroup, sample id, then predicted values or
/// the label followed by per-class probabilities.
pub fn write_predictions_csv(pred: &PredictionResult, ds: &MultiViewDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match &pred.outcome {
        PredictedOutcome::Continuous { original, .. } => {
            let mut header = vec!["subgroup".to_string(), "sample".to_string()];
            header.extend(ds.outcome_names.iter().cloned());
            w.write_record(&header)?;
            for (s, y) in original.iter().enumerate() {
                for (i, row) in y.outer_iter().enumerate() {
                    let mut rec = vec![ds.subgroup_names[s].clone(), i.to_string()];
                    rec.extend(row.iter().map(|&v| fmt(v)));
                    w.write_record(&rec)?;
                }
            }
        }
        PredictedOutcome::MultiClass { probabilities, labels } => {
            let mut header = vec!["subgroup".to_string(), "sample".to_string(), "label".to_string()];
            header.extend(ds.outcome_names.iter().map(|c| format!("p_{c}")));
            w.write_record(&header)?;
            for (s, (p, lab)) in probabilities.iter().zip(labels).enumerate() {
                for (i, row) in p.outer_iter().enumerate() {
                    let mut rec = vec![
                        ds.subgroup_names[s].clone(),
                        i.to_string(),
                        ds.outcome_names.get(lab[i]).cloned().unwrap_or_else(|| lab[i].to_string()),
                    ];
                    rec.extend(row.iter().map(|&v| fmt(v)));
                    w.write_record(&rec)?;
                }
            }
        }
    }
    finish_csv(path, w)
}

/// Generic table writer for callers assembling their own CSV rows.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish_csv(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = array![[0.1, -2.5e-17], [1.0 / 3.0, 7.0]];
        write_matrix_csv(&p, &["a".into(), "b".into()], &m).unwrap();
        let (h, back) = read_matrix_csv(&p).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_non_numeric() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "a,b\n1,x\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(HipError::Parse { .. })));
    }

    #[test]
    fn missing_file_is_io() {
        let err = read_matrix_csv(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(err.is_io());
    }
}
