#![allow(dead_code)]

use hip::{Matrix, MultiViewDataset, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

/// Columns centered to mean zero.
pub fn centered(mut m: Matrix) -> Matrix {
    for mut c in m.columns_mut() {
        let mu = c.mean().unwrap_or(0.0);
        c.mapv_inplace(|v| v - mu);
    }
    m
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Small random dataset; `noise` scales Gaussian noise on the views and the outcome.
pub fn random_dataset(seed: u64, sizes: &[usize], p: &[usize], k: usize, multiclass: bool, noise: f64) -> MultiViewDataset {
    let mut r = rng(seed);
    let theta = normal(&mut r, k, if multiclass { 3 } else { 1 });
    let bs: Vec<Vec<Matrix>> = p.iter().map(|&pd| sizes.iter().map(|_| normal(&mut r, pd, k)).collect()).collect();
    let mut views = vec![Vec::new(); p.len()];
    let mut ys = Vec::new();
    let mut labels = Vec::new();
    for (s, &n) in sizes.iter().enumerate() {
        let z = normal(&mut r, n, k);
        for d in 0..p.len() {
            let mut x = z.dot(&bs[d][s].t());
            x.scaled_add(noise, &normal(&mut r, n, p[d]));
            views[d].push(x);
        }
        let w = z.dot(&theta);
        if multiclass {
            labels.push(
                (0..n)
                    .map(|i| {
                        let row = w.row(i);
                        let u: f64 = r.random::<f64>();
                        // noisy argmax so every class tends to appear
                        let mut best = 0;
                        for j in 1..row.len() {
                            if row[j] + u * noise > row[best] {
                                best = j;
                            }
                        }
                        best
                    })
                    .collect::<Vec<_>>(),
            );
        } else {
            let mut y = w;
            y.scaled_add(noise.max(0.1), &normal(&mut r, n, 1));
            ys.push(y);
        }
    }
    let outcome = if multiclass {
        Outcome::from_labels(&labels, 3).unwrap()
    } else {
        Outcome::Continuous { y: ys, standardized: false }
    };
    MultiViewDataset::new(views, outcome).unwrap()
}

/// Exactly rank-`k` data with an outcome that is already standardized per
/// subgroup, so standardization leaves it unchanged.
pub struct Noiseless {
    pub data: MultiViewDataset,
    pub z: Vec<Matrix>,
    pub b: Vec<Vec<Matrix>>,
    pub theta: Matrix,
}

pub fn noiseless(seed: u64, sizes: &[usize], p: &[usize], k: usize) -> Noiseless {
    let mut r = rng(seed);
    let mut theta = normal(&mut r, k, 1);
    let nrm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    theta.mapv_inplace(|v| v / nrm);
    let b: Vec<Vec<Matrix>> = p.iter().map(|&pd| sizes.iter().map(|_| normal(&mut r, pd, k)).collect()).collect();
    let mut views = vec![Vec::new(); p.len()];
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for (s, &n) in sizes.iter().enumerate() {
        let mut z = centered(normal(&mut r, n, k));
        let y0 = z.dot(&theta);
        let sd = sample_sd(y0.as_slice().unwrap());
        z.mapv_inplace(|v| v / sd);
        for d in 0..p.len() {
            views[d].push(z.dot(&b[d][s].t()));
        }
        ys.push(z.dot(&theta));
        zs.push(z);
    }
    let outcome = Outcome::Continuous { y: ys, standardized: true };
    Noiseless {
        data: MultiViewDataset::new(views, outcome).unwrap(),
        z: zs,
        b,
        theta,
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(x: &Matrix, h: f64, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(x.dim());
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let (i, j) = (idx / x.ncols(), idx % x.ncols());
        let orig = xp[[i, j]];
        xp[[i, j]] = orig + h;
        let fp = f(&xp);
        xp[[i, j]] = orig - h;
        let fm = f(&xp);
        xp[[i, j]] = orig;
        g[[i, j]] = (fp - fm) / (2.0 * h);
    }
    g
}

/// `max |a - b| / max(max |b|, 1)`.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    diff / scale
}
