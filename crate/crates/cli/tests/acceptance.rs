//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Statistical criteria use the simulation protocol: raw (unstandardized)
//! views, standardized outcome, K = 2, random lambda search over an 8 x 8
//! grid on (0, 1] trying 15% of the pairs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use hip::linalg::solve_gram;
use hip::metrics::{accuracy, score_selection, test_mse};
use hip::penalty::prox_block_l21;
use hip::prediction::{predict, predict_scores, predict_scores_scaled, PredictedOutcome};
use hip::selection::{search_lambda, select_k_simple, EigenProxy, LambdaGrid};
use hip::simulation::{generate_dataset, replicate_seed, GroundTruth, Overlap, Setting, SimScenario};
use hip::solver::{
    cross_entropy, cross_entropy_grad, fista, fit_from, g_gradient, g_loss, initialize, objective, prepare,
    theta_multiclass_gradient, theta_multiclass_loss, unpenalized_objective, xi_gradient, xi_loss,
    z_multiclass_gradient, z_multiclass_loss, BlockQuadratic, FistaParams,
};
use hip::{fit, FitOptions, Matrix, MultiViewDataset, Outcome, OutcomeKind, Ridge, SelectionReport, ZERO_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const REPLICATES: u64 = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ------------------------------------------------------------ simulation runs

struct RepScore {
    tpr: f64,
    fpr: f64,
    f1: f64,
    /// Continuous: pooled MSE on the fit-time outcome scale.
    mse: Option<f64>,
    /// Multiclass: (accuracy, majority-class share).
    acc: Option<(f64, f64)>,
    /// Share of each subgroup's non-shared signal rows selected for it.
    specific_recall: f64,
}

fn simulation_opts(r: u64) -> FitOptions {
    let mut o = FitOptions::default();
    o.standardize_x = false;
    o.seed = r;
    o
}

fn run_replicate(overlap: Overlap, outcome: OutcomeKind, base_seed: u64, r: u64) -> RepScore {
    let sc = SimScenario::new(overlap, Setting::P1, outcome, replicate_seed(base_seed, r));
    let (train, test, truth) = generate_dataset(&sc).unwrap();
    let grid = LambdaGrid::random(8, 1.0, 0.15, replicate_seed(base_seed ^ 0xA5A5, r)).unwrap();
    let search = search_lambda(&train, 2, &grid, &simulation_opts(r)).unwrap();
    score(&search.best_model, &train, &test, &truth)
}

fn score(model: &hip::FactorModel, train: &MultiViewDataset, test: &MultiViewDataset, truth: &GroundTruth) -> RepScore {
    let report = SelectionReport::from_model(model, train, ZERO_TOL);
    let p = train.view_sizes();
    let (mut tpr, mut fpr, mut f1, mut cells) = (0.0, 0.0, 0.0, 0.0);
    let (mut spec_hit, mut spec_total) = (0usize, 0usize);
    for d in 0..train.n_views() {
        for s in 0..train.n_subgroups() {
            let sel = report.indices(d, s);
            let sc = score_selection(&sel, &truth.signal[d][s], p[d]).unwrap();
            tpr += sc.tpr;
            fpr += sc.fpr;
            f1 += sc.f1;
            cells += 1.0;
            // signal rows of s that are not signal for every subgroup
            let specific: Vec<usize> = truth.signal[d][s]
                .iter()
                .copied()
                .filter(|l| !(0..train.n_subgroups()).all(|t| truth.signal[d][t].contains(l)))
                .collect();
            spec_total += specific.len();
            spec_hit += specific.iter().filter(|l| sel.binary_search(l).is_ok()).count();
        }
    }
    let pred = predict(model, test).unwrap();
    let (mse, acc) = match &pred.outcome {
        PredictedOutcome::Continuous { standardized, .. } => {
            let obs = model.standardizer.apply_outcome(&test.outcome).unwrap();
            let (mut sse, mut n) = (0.0, 0usize);
            for (p, o) in standardized.iter().zip(obs.matrices()) {
                sse += test_mse(p, o).unwrap() * p.len() as f64;
                n += p.len();
            }
            (Some(sse / n as f64), None)
        }
        PredictedOutcome::MultiClass { labels, .. } => {
            let t = test.outcome.labels().unwrap().concat();
            let m = test.outcome.width();
            let mut counts = vec![0usize; m];
            for &l in &t {
                counts[l] += 1;
            }
            let majority = *counts.iter().max().unwrap() as f64 / t.len() as f64;
            (None, Some((accuracy(&labels.concat(), &t).unwrap(), majority)))
        }
    };
    RepScore {
        tpr: tpr / cells,
        fpr: fpr / cells,
        f1: f1 / cells,
        mse,
        acc,
        specific_recall: if spec_total == 0 { 1.0 } else { spec_hit as f64 / spec_total as f64 },
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

fn replicates(overlap: Overlap, outcome: OutcomeKind, base_seed: u64) -> Vec<RepScore> {
    (0..REPLICATES).map(|r| run_replicate(overlap, outcome, base_seed, r)).collect()
}

fn criteria_1_2() -> (Verdict, Verdict) {
    let reps = replicates(Overlap::Full, OutcomeKind::Continuous, 101);
    let tpr = mean(reps.iter().map(|r| r.tpr));
    let fpr = mean(reps.iter().map(|r| r.fpr));
    let f1 = mean(reps.iter().map(|r| r.f1));
    let mse = mean(reps.iter().map(|r| r.mse.unwrap()));
    (
        verdict(
            f1 >= 0.90 && fpr <= 0.05 && tpr >= 0.90,
            format!("mean F1 {f1:.4} (>= 0.90), FPR {fpr:.4} (<= 0.05), TPR {tpr:.4} (>= 0.90)"),
        ),
        verdict(
            (0.15..=0.35).contains(&mse),
            format!("mean test MSE {mse:.4} (within [0.15, 0.35])"),
        ),
    )
}

fn criterion_3() -> Verdict {
    let reps = replicates(Overlap::Partial, OutcomeKind::Continuous, 303);
    let tpr = mean(reps.iter().map(|r| r.tpr));
    let fpr = mean(reps.iter().map(|r| r.fpr));
    let spec = mean(reps.iter().map(|r| r.specific_recall));
    verdict(
        tpr >= 0.85 && fpr <= 0.07,
        format!("mean TPR {tpr:.4} (>= 0.85), FPR {fpr:.4} (<= 0.07); non-shared rows recovered {spec:.4}"),
    )
}

fn criterion_4() -> Verdict {
    let (mut right_10, mut over_10, mut over_05) = (0, 0, 0);
    let runs = 20;
    for r in 0..runs {
        let sc = SimScenario::new(Overlap::Full, Setting::P1, OutcomeKind::Continuous, replicate_seed(404, r));
        let (train, _, _) = generate_dataset(&sc).unwrap();
        let k10 = select_k_simple(&train, 0.10, false, EigenProxy::default()).unwrap();
        let k05 = select_k_simple(&train, 0.05, false, EigenProxy::default()).unwrap();
        right_10 += usize::from(k10 == 2);
        over_10 += usize::from(k10 > 2);
        over_05 += usize::from(k05 > 2);
    }
    let share = right_10 as f64 / runs as f64;
    verdict(
        share >= 0.70 && over_05 > over_10,
        format!("K = 2 at 0.10 in {share:.2} of runs (>= 0.70); over-selected {over_05}/{runs} at 0.05 vs {over_10}/{runs} at 0.10"),
    )
}

fn criterion_5() -> Verdict {
    let reps = replicates(Overlap::Full, OutcomeKind::Multiclass, 505);
    let acc = mean(reps.iter().map(|r| r.acc.unwrap().0));
    let base = mean(reps.iter().map(|r| r.acc.unwrap().1));
    let f1 = mean(reps.iter().map(|r| r.f1));
    verdict(
        acc >= base + 0.20 && f1 >= 0.85,
        format!("mean accuracy {acc:.4} vs majority {base:.4} (gap >= 0.20), mean F1 {f1:.4} (>= 0.85)"),
    )
}

// ------------------------------------------------------------ optimization suite

fn normal(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_simple_fn((rows, cols), || r.sample::<f64, _>(StandardNormal))
}

fn fd_gradient(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Matrix {
    const H: f64 = 1e-6;
    let mut g = Matrix::zeros(x.dim());
    let mut xp = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let o = xp[[i, j]];
            xp[[i, j]] = o + H;
            let fp = f(&xp);
            xp[[i, j]] = o - H;
            let fm = f(&xp);
            xp[[i, j]] = o;
            g[[i, j]] = (fp - fm) / (2.0 * H);
        }
    }
    g
}

fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    diff / b.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn one_hot(r: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..m)).collect();
    Outcome::from_labels(&[labels], m).unwrap().matrices()[0].clone()
}

fn gradients() -> (bool, String) {
    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        let mut r = ChaCha8Rng::seed_from_u64(9000 + seed);
        let (n, p, k, m) = (8, 5, 2 + seed as usize % 2, 2 + seed as usize % 3);
        let x = normal(&mut r, n, p);
        let z = normal(&mut r, n, k);
        let g = normal(&mut r, p, k);
        let xi = normal(&mut r, p, k);
        let b = normal(&mut r, p, k);
        let q = BlockQuadratic::new(&x, &z);
        worst = worst.max(rel_err(&q.grad(&b), &fd_gradient(&b, |t| q.value(t))));
        worst = worst.max(rel_err(&xi_gradient(&x, &z, &g, &xi), &fd_gradient(&xi, |t| xi_loss(&x, &z, &g, t))));
        let xs = vec![x.clone(), normal(&mut r, n + 2, p)];
        let zs = vec![z.clone(), normal(&mut r, n + 2, k)];
        let xis = vec![xi.clone(), normal(&mut r, p, k)];
        worst = worst.max(rel_err(&g_gradient(&xs, &zs, &g, &xis), &fd_gradient(&g, |t| g_loss(&xs, &zs, t, &xis))));

        let y = one_hot(&mut r, n, m);
        let w = normal(&mut r, n, m);
        worst = worst.max(rel_err(&cross_entropy_grad(&y, &w).1, &fd_gradient(&w, |t| cross_entropy(&y, t))));
        let theta = normal(&mut r, k, m);
        let x2 = normal(&mut r, n, 3);
        let b2 = normal(&mut r, 3, k);
        let (xr, br) = ([&x, &x2], [&b, &b2]);
        worst = worst.max(rel_err(
            &z_multiclass_gradient(&xr, &br, &y, &theta, &z),
            &fd_gradient(&z, |t| z_multiclass_loss(&xr, &br, &y, &theta, t)),
        ));
        let ys = vec![y.clone(), one_hot(&mut r, n + 3, m)];
        let zs = vec![z.clone(), normal(&mut r, n + 3, k)];
        worst = worst.max(rel_err(
            &theta_multiclass_gradient(&ys, &zs, &theta),
            &fd_gradient(&theta, |t| theta_multiclass_loss(&ys, &zs, t)),
        ));
    }
    (worst <= 1e-5, format!("(a) gradient rel err {worst:.2e}"))
}

fn random_dataset(seed: u64, multiclass: bool) -> MultiViewDataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (sizes, p, k) = ([15usize, 18], [6usize, 9], 2);
    let theta = normal(&mut r, k, if multiclass { 3 } else { 1 });
    let mut views = vec![Vec::new(); 2];
    let mut ys = Vec::new();
    for &n in &sizes {
        let z = normal(&mut r, n, k);
        for d in 0..2 {
            let b = normal(&mut r, p[d], k);
            views[d].push(z.dot(&b.t()) + normal(&mut r, n, p[d]) * 0.5);
        }
        ys.push(z.dot(&theta) + normal(&mut r, n, theta.ncols()) * 0.5);
    }
    let outcome = if multiclass {
        let labels: Vec<Vec<usize>> = ys.iter().map(hip::data_model::argmax_rows).collect();
        Outcome::from_labels(&labels, 3).unwrap()
    } else {
        Outcome::Continuous { y: ys, standardized: false }
    };
    MultiViewDataset::new(views, outcome).unwrap()
}

fn monotone() -> (bool, String) {
    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        let data = random_dataset(seed, seed % 2 == 1);
        let mut opts = FitOptions::default().with_lambdas(0.3, 0.2);
        opts.hyper.max_outer_iters = 40;
        opts.standardize_x = seed % 4 < 2;
        let (scaled, st) = prepare(&data, opts.standardize_x);
        let init = initialize(&scaled, &opts.hyper, seed).unwrap();
        let mut scored = init.clone();
        scored.hyper = opts.hyper.clone();
        let mut prev = objective(&scored, &scaled).1;
        let model = fit_from(init, &scaled, &opts, st).unwrap();
        for rec in &model.trace.records {
            worst = worst.max((rec.total - prev) / prev.abs().max(1e-12));
            prev = rec.total;
        }
    }
    (worst <= 1e-6, format!("(b) largest relative rise {worst:.2e}"))
}

fn fista_normal_equations() -> (bool, String) {
    let mut worst = 0.0_f64;
    for seed in 0..10u64 {
        let mut r = ChaCha8Rng::seed_from_u64(7000 + seed);
        let x = normal(&mut r, 30, 8);
        let z = normal(&mut r, 30, 3);
        let q = BlockQuadratic::new(&x, &z);
        let res = fista(
            &Matrix::zeros((8, 3)),
            |b| q.value(b),
            |b| q.grad(b),
            &FistaParams {
                lambda: 0.0,
                lipschitz: 2.0 * q.ztz_max_eigenvalue(),
                initial_step: None,
                beta: 0.5,
                eps: 1e-20,
                max_iters: 5000,
            },
        );
        let exact = solve_gram(&z.t().dot(&z), &z.t().dot(&x), 0.0).solution.t().to_owned();
        worst = worst.max(max_abs(&(&res.x - &exact)));
    }
    (worst <= 1e-5, format!("(c) FISTA vs normal equations {worst:.2e}"))
}

/// Minimizes `0.5 ||a v - v||^2 + t a ||v||` over `a` in `[0, 1]` by ternary search.
fn prox_oracle(v: &[f64], t: f64) -> Vec<f64> {
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let f = |a: f64| 0.5 * (a - 1.0).powi(2) * nv * nv + t * a * nv;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let a = 0.5 * (lo + hi);
    v.iter().map(|x| a * x).collect()
}

fn prox() -> (bool, String) {
    let mut r = ChaCha8Rng::seed_from_u64(6000);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let v: Vec<f64> = (0..3).map(|_| r.random_range(-5.0..5.0)).collect();
        let t = r.random_range(0.0..6.0);
        let p = prox_block_l21(&Matrix::from_shape_vec((1, 3), v.clone()).unwrap(), t);
        for (a, b) in p.iter().zip(prox_oracle(&v, t)) {
            worst = worst.max((a - b).abs());
        }
    }
    (worst <= 1e-6, format!("(d) prox vs 1-D oracle {worst:.2e}"))
}

/// Exactly rank-2 data with centered scores and an outcome already at unit sd.
fn noiseless(seed: u64) -> (MultiViewDataset, Vec<Matrix>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (sizes, p) = ([40usize, 45], [10usize, 12]);
    let mut theta = normal(&mut r, 2, 1);
    let nt = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    theta.mapv_inplace(|v| v / nt);
    let b: Vec<Vec<Matrix>> = p.iter().map(|&pd| sizes.iter().map(|_| normal(&mut r, pd, 2)).collect()).collect();
    let mut views = vec![Vec::new(); 2];
    let (mut ys, mut zs) = (Vec::new(), Vec::new());
    for (s, &n) in sizes.iter().enumerate() {
        let mut z = normal(&mut r, n, 2);
        for mut c in z.columns_mut() {
            let mu = c.mean().unwrap();
            c.mapv_inplace(|v| v - mu);
        }
        let y0 = z.dot(&theta);
        let sd = (y0.mapv(|v| v * v).sum() / (n as f64 - 1.0)).sqrt();
        z.mapv_inplace(|v| v / sd);
        for d in 0..2 {
            views[d].push(z.dot(&b[d][s].t()));
        }
        ys.push(z.dot(&theta));
        zs.push(z);
    }
    let ds = MultiViewDataset::new(views, Outcome::Continuous { y: ys, standardized: true }).unwrap();
    (ds, zs)
}

fn exact_opts(max_outer: usize) -> FitOptions {
    let mut o = FitOptions::default();
    o.standardize_x = false;
    o.hyper.ridge = Ridge::Absolute(0.0);
    o.hyper.eps_outer = 1e-12;
    o.hyper.eps_inner = 1e-14;
    o.hyper.max_outer_iters = max_outer;
    o.hyper.max_inner_iters = 5000;
    o
}

fn noiseless_loss() -> (bool, String) {
    let mut worst = 0.0_f64;
    for seed in 0..3 {
        let (ds, _) = noiseless(seed);
        let model = fit(&ds, &exact_opts(2000)).unwrap();
        worst = worst.max(unpenalized_objective(&model, &ds));
    }
    (worst <= 1e-6, format!("(e) noiseless loss {worst:.2e}"))
}

fn criterion_6() -> Verdict {
    let parts = [gradients(), monotone(), fista_normal_equations(), prox(), noiseless_loss()];
    let pass = parts.iter().all(|p| p.0);
    let detail: Vec<String> = parts
        .iter()
        .map(|(ok, d)| format!("{d}{}", if *ok { "" } else { " FAILED" }))
        .collect();
    verdict(pass, detail.join("; "))
}

fn criterion_7() -> Verdict {
    let mut z_err = 0.0_f64;
    for seed in 20..23 {
        let (ds, _) = noiseless(seed);
        let model = fit(&ds, &exact_opts(12000)).unwrap();
        let z = predict_scores(&model, &ds).unwrap();
        for s in 0..2 {
            z_err = z_err.max(max_abs(&(&z[s] - &model.z[s])));
        }
    }
    let mut orth = 0.0_f64;
    for seed in 0..5 {
        let ds = random_dataset(40 + seed, false);
        let mut opts = FitOptions::default().with_lambdas(0.2, 0.1);
        opts.hyper.ridge = Ridge::Absolute(0.0);
        let model = fit(&ds, &opts).unwrap();
        let views = model.standardizer.apply_views(&ds.views).unwrap();
        let z = predict_scores_scaled(&model, &views).unwrap();
        for s in 0..2 {
            let mut g = Matrix::zeros((views[0][s].nrows(), model.k()));
            for d in 0..2 {
                let b = model.b(d, s);
                g += &(&views[d][s] - &z[s].dot(&b.t())).dot(b);
            }
            orth = orth.max(max_abs(&g));
        }
    }
    verdict(
        z_err <= 1e-6 && orth <= 1e-8,
        format!("score error {z_err:.2e} (<= 1e-6), residual-loading inner products {orth:.2e} (<= 1e-8)"),
    )
}

// ------------------------------------------------------------ CLI determinism

fn hip_in(cwd: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_hip"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HIP_WORKERS")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_8() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let mut runs = Vec::new();
    for (i, workers) in ["3", "3", "1"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        fs::create_dir_all(&dir).unwrap();
        let w = ["--workers", workers];
        let steps: Vec<Vec<&str>> = vec![
            vec!["simulate", "--setting", "custom", "--p", "40,50", "--n", "60,70", "--n-signal", "10", "--replicates", "2", "--seed", "8", "--out", "sim"],
            vec!["fit", "--manifest", "sim/rep_001/train/manifest.json", "--k", "auto", "--tune", "random", "--standardize-x", "false", "--seed", "2", "--allow-nonconvergence", "--out", "fit"],
            vec!["predict", "--model", "fit/model.json", "--manifest", "sim/rep_001/test/manifest.json", "--out", "pred"],
            vec!["evaluate", "--model", "fit/model.json", "--manifest", "sim/rep_001/test/manifest.json", "--truth", "sim/rep_001/truth.csv", "--out", "eval"],
            vec!["bootstrap", "--manifest", "sim/rep_001/train/manifest.json", "--n-boot", "4", "--top-fraction", "0.3", "--tune", "random", "--standardize-x", "false", "--seed", "5", "--out", "boot"],
        ];
        for step in steps {
            let args: Vec<&str> = step.iter().chain(w.iter()).copied().collect();
            if !hip_in(&dir, &args) {
                return verdict(false, format!("`hip {}` failed", args.join(" ")));
            }
        }
        runs.push(files(&dir));
    }
    let same = runs[0] == runs[1] && runs[0] == runs[2];
    let differing: Vec<String> = runs[0]
        .iter()
        .filter(|(k, v)| runs[1].get(*k) != Some(v) || runs[2].get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    verdict(
        same,
        if same {
            format!("{} output files byte-identical across 2 runs at 3 workers and 1 run at 1 worker", runs[0].len())
        } else {
            format!("differing files: {}", differing.join(", "))
        },
    )
}

fn main() {
    // libtest flags such as --nocapture or a name filter are ignored
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut record = |n: usize, name: &'static str, v: Verdict, t: Instant| {
        println!(
            "[{}] {n}. {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((n, name, v));
    };
    let t = Instant::now();
    let (c1, c2) = criteria_1_2();
    record(1, "full overlap selection", c1, t);
    record(2, "full overlap test MSE", c2, t);
    let t = Instant::now();
    record(3, "partial overlap selection", criterion_3(), t);
    let t = Instant::now();
    record(4, "K selection", criterion_4(), t);
    let t = Instant::now();
    record(5, "binary outcome", criterion_5(), t);
    let t = Instant::now();
    record(6, "optimization suite", criterion_6(), t);
    let t = Instant::now();
    record(7, "prediction closed form", criterion_7(), t);
    let t = Instant::now();
    record(8, "CLI determinism", criterion_8(), t);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
