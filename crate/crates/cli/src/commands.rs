use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use hip::io;
use hip::metrics::{accuracy, score_selection, test_mse};
use hip::prediction::{self, PredictedOutcome};
use hip::selection::{
    bootstrap_stability, search_lambda, select_k_algorithmic, select_k_simple, BicRecord, BootstrapOptions,
    EigenProxy, LambdaGrid, LambdaSearch,
};
use hip::simulation::{generate_dataset, replicate_seed, LabelRule, Overlap, Setting, SimScenario};
use hip::{FactorModel, FitOptions, MultiViewDataset, OutcomeKind, Ridge, SelectionReport, ZERO_TOL};

use crate::config::{ConfigFile, List};
use crate::error::CliError;
use crate::{BootstrapArgs, Common, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs, TuneArgs};

type Result<T> = std::result::Result<T, CliError>;

fn choice<T: Copy>(value: &str, key: &str, options: &[(&str, T)]) -> Result<T> {
    let v = value.trim().to_ascii_lowercase();
    options.iter().find(|(name, _)| *name == v).map(|&(_, t)| t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        CliError::data(format!("--{key}: '{value}' is not one of {}", names.join(", ")))
    })
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| CliError::data(format!("--{key} is required")))
}

/// Runs `f` on a pool of the resolved size.
fn with_pool<T: Send>(common: &Common, cfg: &ConfigFile, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let workers = cfg.workers(common.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::data(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Writes the resolved settings. The worker count is left out: outputs do
/// not depend on it.
fn write_snapshot(dir: &Path, command: &str, mut settings: Value) -> Result<()> {
    settings["command"] = json!(command);
    Ok(io::write_json(&dir.join("config.json"), &settings)?)
}

// ---------------------------------------------------------------- simulate

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.common.config.as_deref())?;
    let scenario = cfg.resolve(a.scenario, "scenario", "full".into())?;
    let overlap = choice(&scenario, "scenario", &[("full", Overlap::Full), ("partial", Overlap::Partial)])?;
    let setting_name = cfg.resolve(a.setting, "setting", "p1".into())?;
    let p = cfg.resolve_opt(a.p, "p")?;
    let setting = match setting_name.to_ascii_lowercase().as_str() {
        "p1" => Setting::P1,
        "p2" => Setting::P2,
        "p3" => Setting::P3,
        "custom" => Setting::Custom(required(p.clone(), "p")?.0),
        other => return Err(CliError::data(format!("--setting: '{other}' is not one of p1, p2, p3, custom"))),
    };
    if p.is_some() && !matches!(setting, Setting::Custom(_)) {
        return Err(CliError::data("--p only applies to --setting custom"));
    }
    let outcome_name = cfg.resolve(a.outcome, "outcome", "continuous".into())?;
    let outcome = choice(
        &outcome_name,
        "outcome",
        &[("continuous", OutcomeKind::Continuous), ("multiclass", OutcomeKind::Multiclass)],
    )?;
    let rule_name = cfg.resolve(a.label_rule, "label_rule", "argmax".into())?;
    let label_rule = choice(&rule_name, "label-rule", &[("argmax", LabelRule::Argmax), ("sample", LabelRule::Sample)])?;
    let replicates = cfg.resolve(a.replicates, "replicates", 1usize)?;
    if replicates == 0 {
        return Err(CliError::data("--replicates must be at least 1"));
    }
    let seed = cfg.resolve(a.seed, "seed", 0u64)?;
    let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;

    let mut base = SimScenario::new(overlap, setting, outcome, seed);
    base.label_rule = label_rule;
    if let Some(n) = cfg.resolve_opt(a.n, "n")? {
        base.subgroup_sizes = n.0;
    }
    if let Some(k) = cfg.resolve_opt(a.k_true, "k_true")? {
        base.k_true = k;
    }
    match cfg.resolve_opt(a.n_signal, "n_signal")? {
        Some(v) => base.n_signal = v,
        // shrink the default signal block so small custom views can hold it
        None => base.n_signal = base.n_signal.min(max_signal(&base)),
    }
    if let Some(v) = cfg.resolve_opt(a.sigma_x, "sigma_x")? {
        base.sigma_x = v;
    }
    if let Some(v) = cfg.resolve_opt(a.sigma_y, "sigma_y")? {
        base.sigma_y = v;
    }
    base.validate()?;

    let bundles = with_pool(&a.common, &cfg, || {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut sc = base.clone();
                sc.seed = replicate_seed(seed, r as u64);
                Ok(generate_dataset(&sc)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    for (r, (train, test, truth)) in bundles.iter().enumerate() {
        let dir = out.join(format!("rep_{:03}", r + 1));
        io::save_dataset(train, &dir.join("train"))?;
        io::save_dataset(test, &dir.join("test"))?;
        io::write_truth_csv(&truth.signal, train, &dir.join("truth.csv"))?;
    }
    write_snapshot(
        &out,
        "simulate",
        json!({
            "scenario": base,
            "replicates": replicates,
            "seed": seed,
            "out": path_str(&out),
        }),
    )?;
    println!("wrote {replicates} replicate(s) to {}", out.display());
    Ok(())
}

/// Largest signal block the scenario's smallest view can hold.
fn max_signal(sc: &SimScenario) -> usize {
    let p = sc.setting.view_sizes().into_iter().min().unwrap_or(0);
    match sc.overlap {
        Overlap::Full => p,
        // subgroup s starts at s * n / 2
        Overlap::Partial => 2 * p / (sc.subgroup_sizes.len() + 1).max(2),
    }
    .max(1)
}

// ---------------------------------------------------------------- fit

struct Tuning {
    grid: Option<LambdaGrid>,
    lambda_g: f64,
    lambda_xi: f64,
    opts: FitOptions,
    snapshot: Value,
}

fn resolve_tuning(t: TuneArgs, cfg: &ConfigFile, default_tune: &str) -> Result<Tuning> {
    let tune = cfg.resolve(t.tune, "tune", default_tune.to_string())?.to_ascii_lowercase();
    let lambda_g = cfg.resolve(t.lambda_g, "lambda_g", 0.0)?;
    let lambda_xi = cfg.resolve(t.lambda_xi, "lambda_xi", 0.0)?;
    let steps = cfg.resolve(t.grid_steps, "grid_steps", 8usize)?;
    let lambda_max = cfg.resolve(t.lambda_max, "lambda_max", 1.0)?;
    let fraction = cfg.resolve(t.fraction, "fraction", 0.15)?;
    let seed = cfg.resolve(t.seed, "seed", 0u64)?;

    let mut opts = FitOptions {
        seed,
        standardize_x: cfg.resolve(t.standardize_x, "standardize_x", true)?,
        ..FitOptions::default()
    };
    opts.hyper.max_outer_iters = cfg.resolve(t.max_outer_iters, "max_outer_iters", opts.hyper.max_outer_iters)?;
    opts.hyper.eps_outer = cfg.resolve(t.eps_outer, "eps_outer", opts.hyper.eps_outer)?;
    opts.hyper.max_inner_iters = cfg.resolve(t.max_inner_iters, "max_inner_iters", opts.hyper.max_inner_iters)?;
    opts.hyper.eps_inner = cfg.resolve(t.eps_inner, "eps_inner", opts.hyper.eps_inner)?;
    let ridge = match cfg.resolve_opt(t.ridge, "ridge")? {
        Some(r) => Ridge::Relative(r),
        None => opts.hyper.ridge,
    };
    opts.hyper.ridge = ridge;
    opts.hyper.lambda_g = lambda_g;
    opts.hyper.lambda_xi = lambda_xi;

    let grid = match tune.as_str() {
        "none" => None,
        "grid" => Some(LambdaGrid::full(steps, lambda_max)?),
        "random" => Some(LambdaGrid::random(steps, lambda_max, fraction, seed)?),
        other => return Err(CliError::data(format!("--tune: '{other}' is not one of random, grid, none"))),
    };
    let snapshot = json!({
        "tune": tune,
        "lambda_g": lambda_g,
        "lambda_xi": lambda_xi,
        "grid_steps": steps,
        "lambda_max": lambda_max,
        "fraction": fraction,
        "seed": seed,
        "standardize_x": opts.standardize_x,
        "max_outer_iters": opts.hyper.max_outer_iters,
        "eps_outer": opts.hyper.eps_outer,
        "max_inner_iters": opts.hyper.max_inner_iters,
        "eps_inner": opts.hyper.eps_inner,
        "ridge": ridge,
    });
    Ok(Tuning {
        grid,
        lambda_g,
        lambda_xi,
        opts,
        snapshot,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(am), Value::Object(bm)) = (a.as_object_mut(), b) {
        am.extend(bm);
    }
    a
}

struct FitOutcome {
    model: FactorModel,
    k: usize,
    simple_k: Option<usize>,
    bic: Vec<BicRecord>,
    lambda: (f64, f64),
}

fn from_search(s: LambdaSearch, k: usize, simple_k: Option<usize>, bic: Vec<BicRecord>) -> FitOutcome {
    FitOutcome {
        lambda: s.best,
        model: s.best_model,
        k,
        simple_k,
        bic,
    }
}

pub fn fit(a: FitArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.common.config.as_deref())?;
    let manifest = required(cfg.resolve_opt(a.manifest, "manifest")?, "manifest")?;
    let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;
    let k_arg = cfg.resolve(a.k, "k", "auto".into())?;
    let k_method = cfg.resolve(a.k_method, "k_method", "simple".into())?.to_ascii_lowercase();
    let threshold = cfg.resolve(a.threshold, "threshold", 0.10)?;
    let eigen_name = cfg.resolve(a.eigen, "eigen", "singular".into())?;
    let proxy = choice(
        &eigen_name,
        "eigen",
        &[("singular", EigenProxy::Singular), ("squared", EigenProxy::Squared)],
    )?;
    let raw_scree = cfg.resolve(a.raw_scree, "raw_scree", false)?;
    let allow = a.allow_nonconvergence || cfg.get::<bool>("allow_nonconvergence")?.unwrap_or(false);
    let tuning = resolve_tuning(a.tune, &cfg, "random")?;
    let fixed_k = if k_arg.eq_ignore_ascii_case("auto") {
        None
    } else {
        Some(
            k_arg
                .parse::<usize>()
                .map_err(|_| CliError::data(format!("--k: '{k_arg}' is neither a positive integer nor auto")))?,
        )
    };
    if !matches!(k_method.as_str(), "simple" | "algorithmic") {
        return Err(CliError::data(format!("--k-method: '{k_method}' is not one of simple, algorithmic")));
    }

    let ds = io::load_dataset(&manifest)?;
    let res = with_pool(&a.common, &cfg, || {
        let opts = &tuning.opts;
        let single = || LambdaGrid::from_candidates(vec![(tuning.lambda_g, tuning.lambda_xi)]);
        match fixed_k {
            Some(k) => match &tuning.grid {
                Some(grid) => {
                    let s = search_lambda(&ds, k, grid, opts)?;
                    let bic = s.records.clone();
                    Ok(from_search(s, k, None, bic))
                }
                None => {
                    let s = search_lambda(&ds, k, &single()?, opts)?;
                    Ok(from_search(s, k, None, Vec::new()))
                }
            },
            None if k_method == "algorithmic" => {
                let grid = match &tuning.grid {
                    Some(g) => g.clone(),
                    None => single()?,
                };
                let alg = select_k_algorithmic(&ds, threshold, raw_scree, proxy, &grid, opts)?;
                let bic: Vec<BicRecord> = alg.searches.iter().flat_map(|s| s.records.clone()).collect();
                let chosen = alg
                    .searches
                    .into_iter()
                    .find(|s| s.best_model.k() == alg.k)
                    .expect("chosen K was searched");
                Ok(from_search(chosen, alg.k, Some(alg.simple_k), bic))
            }
            None => {
                let k = select_k_simple(&ds, threshold, raw_scree, proxy)?;
                let grid = match &tuning.grid {
                    Some(g) => g.clone(),
                    None => single()?,
                };
                let s = search_lambda(&ds, k, &grid, opts)?;
                let bic = if tuning.grid.is_some() { s.records.clone() } else { Vec::new() };
                Ok(from_search(s, k, Some(k), bic))
            }
        }
    })?;

    let model = &res.model;
    io::save_model(model, &out.join("model.json"))?;
    let report = SelectionReport::from_model(model, &ds, ZERO_TOL);
    io::write_selection_csv(&report, &out.join("selection.csv"))?;
    io::write_loss_trace_csv(&model.trace, &out.join("loss_trace.csv"))?;
    if tuning.grid.is_some() {
        io::write_bic_csv(&res.bic, &out.join("bic.csv"))?;
    }
    let settings = merge(
        tuning.snapshot.clone(),
        json!({
            "manifest": path_str(&manifest),
            "out": path_str(&out),
            "k": k_arg,
            "k_method": k_method,
            "threshold": threshold,
            "eigen": eigen_name.to_ascii_lowercase(),
            "raw_scree": raw_scree,
            "allow_nonconvergence": allow,
        }),
    );
    write_snapshot(&out, "fit", settings)?;
    io::write_json(
        &out.join("summary.json"),
        &json!({
            "k": res.k,
            "simple_k": res.simple_k,
            "lambda_g": res.lambda.0,
            "lambda_xi": res.lambda.1,
            "status": model.status,
            "outer_iterations": model.trace.len(),
            "selected_rows": report.total_selected(),
        }),
    )?;
    println!(
        "K = {}, lambda_G = {}, lambda_xi = {}, {} rows selected, status {:?}",
        res.k,
        res.lambda.0,
        res.lambda.1,
        report.total_selected(),
        model.status
    );
    if !model.status.is_converged() {
        let msg = format!("final fit did not converge ({:?})", model.status);
        if allow {
            log::warn!("{msg}");
        } else {
            return Err(CliError::convergence(msg));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- predict

fn load_pair(model_path: &Path, manifest: &Path) -> Result<(FactorModel, MultiViewDataset)> {
    let model = io::load_model(model_path)?;
    let ds = io::load_dataset(manifest)?;
    Ok((model, ds))
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.common.config.as_deref())?;
    let model_path: PathBuf = required(cfg.resolve_opt(a.model, "model")?, "model")?;
    let manifest: PathBuf = required(cfg.resolve_opt(a.manifest, "manifest")?, "manifest")?;
    let out: PathBuf = required(cfg.resolve_opt(a.out, "out")?, "out")?;
    let (model, ds) = load_pair(&model_path, &manifest)?;
    let pred = prediction::predict(&model, &ds)?;
    io::write_predictions_csv(&pred, &ds, &out.join("predictions.csv"))?;
    write_snapshot(
        &out,
        "predict",
        json!({ "model": path_str(&model_path), "manifest": path_str(&manifest), "out": path_str(&out) }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------- evaluate

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.common.config.as_deref())?;
    let model_path: PathBuf = required(cfg.resolve_opt(a.model, "model")?, "model")?;
    let manifest: PathBuf = required(cfg.resolve_opt(a.manifest, "manifest")?, "manifest")?;
    let truth_path: PathBuf = required(cfg.resolve_opt(a.truth, "truth")?, "truth")?;
    let selection_path: Option<PathBuf> = cfg.resolve_opt(a.selection, "selection")?;
    let replicate = cfg.resolve(a.replicate, "replicate", String::new())?;
    let out: PathBuf = required(cfg.resolve_opt(a.out, "out")?, "out")?;

    let (model, ds) = load_pair(&model_path, &manifest)?;
    let truth = io::read_truth_csv(&truth_path, &ds)?;
    let selected = match &selection_path {
        Some(p) => io::read_selection_csv(p, &ds)?,
        None => {
            let rep = SelectionReport::from_model(&model, &ds, ZERO_TOL);
            (0..ds.n_views())
                .map(|d| (0..ds.n_subgroups()).map(|s| rep.indices(d, s)).collect())
                .collect()
        }
    };

    // per-subgroup prediction quality: MSE on the fit-time outcome scale, or accuracy
    let pred = prediction::predict(&model, &ds)?;
    let mut per_sub: Vec<(String, String, String)> = Vec::new();
    let (pooled_mse, pooled_acc, pooled_base);
    match &pred.outcome {
        PredictedOutcome::Continuous { standardized, .. } => {
            let obs = model.standardizer.apply_outcome(&ds.outcome)?;
            let (mut sse, mut cnt) = (0.0, 0usize);
            for (p, o) in standardized.iter().zip(obs.matrices()) {
                let m = test_mse(p, o)?;
                sse += m * p.len() as f64;
                cnt += p.len();
                per_sub.push((num(m), String::new(), String::new()));
            }
            pooled_mse = num(sse / cnt.max(1) as f64);
            pooled_acc = String::new();
            pooled_base = String::new();
        }
        PredictedOutcome::MultiClass { labels, .. } => {
            let truth_labels = ds
                .outcome
                .labels()
                .ok_or_else(|| CliError::data("model predicts classes but the data outcome is continuous"))?;
            let m = ds.outcome.width();
            for (p, t) in labels.iter().zip(&truth_labels) {
                per_sub.push((String::new(), num(accuracy(p, t)?), num(majority_share(t, m))));
            }
            let all_t = truth_labels.concat();
            pooled_mse = String::new();
            pooled_acc = num(accuracy(&labels.concat(), &all_t)?);
            pooled_base = num(majority_share(&all_t, m));
        }
    }

    let mut rows = Vec::new();
    let (mut tpr, mut fpr, mut f1, mut cells) = (0.0, 0.0, 0.0, 0usize);
    let p = ds.view_sizes();
    for d in 0..ds.n_views() {
        for s in 0..ds.n_subgroups() {
            let sc = score_selection(&selected[d][s], &truth[d][s], p[d])?;
            tpr += sc.tpr;
            fpr += sc.fpr;
            f1 += sc.f1;
            cells += 1;
            let (mse, acc, base) = per_sub[s].clone();
            rows.push(vec![
                replicate.clone(),
                ds.view_names[d].clone(),
                ds.subgroup_names[s].clone(),
                num(sc.tpr),
                num(sc.fpr),
                num(sc.f1),
                mse,
                acc,
                base,
            ]);
        }
    }
    let c = cells.max(1) as f64;
    rows.push(vec![
        replicate.clone(),
        "all".into(),
        "all".into(),
        num(tpr / c),
        num(fpr / c),
        num(f1 / c),
        pooled_mse,
        pooled_acc,
        pooled_base,
    ]);
    io::write_table_csv(
        &out.join("metrics.csv"),
        &["replicate", "view", "subgroup", "tpr", "fpr", "f1", "mse", "accuracy", "baseline"],
        &rows,
    )?;
    write_snapshot(
        &out,
        "evaluate",
        json!({
            "model": path_str(&model_path),
            "manifest": path_str(&manifest),
            "truth": path_str(&truth_path),
            "selection": selection_path.as_deref().map(path_str),
            "replicate": replicate,
            "out": path_str(&out),
        }),
    )?;
    Ok(())
}

/// Accuracy of always predicting the most frequent class.
fn majority_share(labels: &[usize], m: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut counts = vec![0usize; m.max(1)];
    for &l in labels {
        if l < counts.len() {
            counts[l] += 1;
        }
    }
    *counts.iter().max().unwrap_or(&0) as f64 / labels.len() as f64
}

// ---------------------------------------------------------------- bootstrap

pub fn bootstrap(a: BootstrapArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.common.config.as_deref())?;
    let manifest: PathBuf = required(cfg.resolve_opt(a.manifest, "manifest")?, "manifest")?;
    let out: PathBuf = required(cfg.resolve_opt(a.out, "out")?, "out")?;
    let k = cfg.resolve(a.k, "k", 2usize)?;
    let n_boot = cfg.resolve(a.n_boot, "n_boot", 50usize)?;
    let top: List<f64> = cfg.resolve(a.top_fraction, "top_fraction", List(vec![0.1]))?;
    let tuning = resolve_tuning(a.tune, &cfg, "none")?;

    let ds = io::load_dataset(&manifest)?;
    let top_fraction = match top.0.len() {
        1 => vec![top.0[0]; ds.n_views()],
        _ => top.0.clone(),
    };
    let boot = BootstrapOptions {
        n_boot,
        top_fraction: top_fraction.clone(),
        grid: tuning.grid.clone(),
        seed: tuning.opts.seed,
    };
    let opts = tuning.opts.with_k(k);
    let res = with_pool(&a.common, &cfg, || Ok(bootstrap_stability(&ds, &boot, &opts)?))?;

    io::write_selection_csv(&res.report, &out.join("stability.csv"))?;
    let rows: Vec<Vec<String>> = res
        .replicates
        .iter()
        .enumerate()
        .map(|(r, rep)| {
            vec![
                (r + 1).to_string(),
                num(rep.lambda.0),
                num(rep.lambda.1),
                rep.oob_score.map(num).unwrap_or_default(),
                rep.out_of_bag.iter().map(Vec::len).sum::<usize>().to_string(),
            ]
        })
        .collect();
    io::write_table_csv(
        &out.join("bootstrap_replicates.csv"),
        &["replicate", "lambda_g", "lambda_xi", "oob_score", "out_of_bag"],
        &rows,
    )?;
    let settings = merge(
        tuning.snapshot.clone(),
        json!({
            "manifest": path_str(&manifest),
            "out": path_str(&out),
            "k": k,
            "n_boot": n_boot,
            "top_fraction": top_fraction,
        }),
    );
    write_snapshot(&out, "bootstrap", settings)?;
    Ok(())
}
