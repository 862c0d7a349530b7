mod common;

use common::random_dataset;
use hip::penalty::support;
use hip::selection::{
    bic, bootstrap_stability, model_size, search_lambda, select_k_algorithmic, select_k_from_spectrum,
    select_k_simple, BootstrapOptions, EigenProxy, GridMode, LambdaGrid,
};
use hip::simulation::replicate_seed;
use hip::solver::{fit, prepare, unpenalized_objective};
use hip::{FitOptions, ZERO_TOL};
use proptest::prelude::*;

#[test]
fn random_search_evaluates_ceil_of_fraction() {
    let data = random_dataset(1, &[20, 22], &[6, 8], 2, false, 0.4);
    let grid = LambdaGrid::random(8, 1.0, 0.15, 5).unwrap();
    assert_eq!(grid.mode, GridMode::Random);
    let srch = search_lambda(&data, 2, &grid, &FitOptions::default()).unwrap();
    assert_eq!(srch.records.len(), 10);
    let best = srch.records.iter().map(|r| r.bic).fold(f64::INFINITY, f64::min);
    assert_eq!(srch.best_bic(), best);
}

#[test]
fn single_candidate_is_returned() {
    let data = random_dataset(2, &[20, 22], &[6, 8], 2, false, 0.4);
    let grid = LambdaGrid::from_candidates(vec![(0.3, 0.7)]).unwrap();
    let srch = search_lambda(&data, 2, &grid, &FitOptions::default()).unwrap();
    assert_eq!(srch.best, (0.3, 0.7));
    assert_eq!(srch.best_model.hyper.lambda_g, 0.3);
}

#[test]
fn equal_bic_prefers_larger_lambdas() {
    // both penalties wipe out every loading, so the fits coincide
    let data = random_dataset(3, &[20, 22], &[6, 8], 2, false, 0.4);
    let grid = LambdaGrid::from_candidates(vec![(1e6, 1e6), (2e6, 1e6), (1e6, 2e6)]).unwrap();
    let srch = search_lambda(&data, 2, &grid, &FitOptions::default()).unwrap();
    assert_eq!(srch.records[0].bic, srch.records[1].bic);
    assert_eq!(srch.records[1].bic, srch.records[2].bic);
    assert_eq!(srch.best, (2e6, 1e6));
}

#[test]
fn search_is_deterministic() {
    let data = random_dataset(4, &[20, 22], &[6, 8], 2, false, 0.4);
    let a = LambdaGrid::random(8, 1.0, 0.15, 9).unwrap();
    let b = LambdaGrid::random(8, 1.0, 0.15, 9).unwrap();
    assert_eq!(a, b);
    let sa = search_lambda(&data, 2, &a, &FitOptions::default()).unwrap();
    let sb = search_lambda(&data, 2, &b, &FitOptions::default()).unwrap();
    assert_eq!(sa.best, sb.best);
    assert_eq!(sa.records, sb.records);
    assert_eq!(sa.best_model, sb.best_model);
}

#[test]
fn bic_matches_its_definition() {
    let data = random_dataset(5, &[20, 22], &[6, 8], 2, false, 0.4);
    let opts = FitOptions::default().with_lambdas(0.8, 0.5);
    let model = fit(&data, &opts).unwrap();
    let (scaled, _) = prepare(&data, opts.standardize_x);
    let mut nz = 0;
    for d in 0..2 {
        for s in 0..2 {
            nz += model.b(d, s).rows().into_iter().filter(|r| r.iter().any(|v| v.abs() > 1e-7)).count();
        }
    }
    assert_eq!(model_size(&model), nz);
    let expected = 2.0 * unpenalized_objective(&model, &scaled) + nz as f64 * 42f64.ln();
    assert!((bic(&model, &scaled) - expected).abs() <= 1e-9 * expected.abs());
}

#[test]
fn spectrum_example() {
    assert_eq!(select_k_from_spectrum(&[10.0, 5.0, 4.8, 4.7], 0.10), 2);
}

#[test]
fn simple_k_rejects_bad_threshold() {
    let data = random_dataset(6, &[20, 22], &[6, 8], 2, false, 0.4);
    assert!(select_k_simple(&data, 0.0, false, EigenProxy::Singular).is_err());
    assert!(select_k_simple(&data, 1.0, false, EigenProxy::Singular).is_err());
}

#[test]
fn algorithmic_k_keeps_the_smaller_bic() {
    let data = random_dataset(7, &[25, 28], &[6, 8], 2, false, 0.3);
    let grid = LambdaGrid::random(4, 1.0, 0.25, 1).unwrap();
    let res = select_k_algorithmic(&data, 0.10, false, EigenProxy::Singular, &grid, &FitOptions::default()).unwrap();
    assert_eq!(res.candidates.len(), 2);
    assert_eq!(res.candidates[0].0, res.simple_k);
    assert_eq!(res.candidates[1].0, res.simple_k + 1);
    let best = if res.candidates[1].1 < res.candidates[0].1 { res.candidates[1].0 } else { res.candidates[0].0 };
    assert_eq!(res.k, best);
}

#[test]
fn one_bootstrap_at_full_fraction_is_the_single_fit() {
    let data = random_dataset(8, &[20, 22], &[6, 8], 2, false, 0.4);
    let opts = FitOptions::default().with_lambdas(0.6, 0.4);
    let boot = BootstrapOptions {
        n_boot: 1,
        top_fraction: vec![1.0, 1.0],
        grid: None,
        seed: 13,
    };
    let res = bootstrap_stability(&data, &boot, &opts).unwrap();
    let rep = &res.replicates[0];
    let mut o = opts.clone();
    o.seed = replicate_seed(13, 0);
    let single = fit(&data.select_rows(&rep.in_bag).unwrap(), &o).unwrap();
    for d in 0..2 {
        for s in 0..2 {
            assert_eq!(res.report.indices(d, s), support(single.b(d, s), ZERO_TOL));
            let w = single.row_weights(d, s);
            for v in &res.report.selected[d][s] {
                assert_eq!(v.times_selected, 1);
                assert_eq!(v.weight, w[v.index]);
            }
        }
    }
}

#[test]
fn bootstrap_preserves_subgroup_sizes_and_ranks_by_count() {
    let data = random_dataset(9, &[24, 18], &[10, 12], 2, false, 0.8);
    let boot = BootstrapOptions {
        n_boot: 6,
        top_fraction: vec![0.3, 0.2],
        grid: None,
        seed: 4,
    };
    let res = bootstrap_stability(&data, &boot, &FitOptions::default().with_lambdas(1.5, 1.0)).unwrap();
    for rep in &res.replicates {
        assert_eq!(rep.in_bag[0].len(), 24);
        assert_eq!(rep.in_bag[1].len(), 18);
        for s in 0..2 {
            for i in &rep.out_of_bag[s] {
                assert!(!rep.in_bag[s].contains(i));
            }
        }
    }
    for (d, per_sub) in res.report.selected.iter().enumerate() {
        let keep = (boot.top_fraction[d] * data.view_sizes()[d] as f64).ceil() as usize;
        for vars in per_sub {
            for w in vars.windows(2) {
                assert!(w[0].times_selected >= w[1].times_selected);
            }
            if vars.len() > keep {
                // anything past the cutoff must tie with the last kept count
                let cutoff = vars[keep - 1].times_selected;
                assert!(vars[keep..].iter().all(|v| v.times_selected == cutoff));
            }
            assert!(vars.iter().all(|v| v.times_selected >= 1 && v.times_selected <= 6));
        }
    }
}

proptest! {
    #[test]
    fn simple_k_is_monotone_in_threshold(
        mut e in proptest::collection::vec(0.01f64..100.0, 2..12),
        t1 in 0.01f64..0.99,
        t2 in 0.01f64..0.99,
    ) {
        e.sort_by(|a, b| b.total_cmp(a));
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(select_k_from_spectrum(&e, hi) <= select_k_from_spectrum(&e, lo));
    }
}
