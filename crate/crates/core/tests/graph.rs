mod common;

use common::{normal, normal_matrix, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use wpl::graph::{estimate_all, fit_one_regression, symmetrize, threshold_graph, FitRequest, Mode};
use wpl::hyperparam::{average_over_pi, AnchorSet, GridSpec, Sigma2Strategy};
use wpl::kernel_weights::{adaptive_bandwidths, build_weight_plan, Bandwidth, CovariateMatrix, WeightPlan};
use wpl::vi::RegressionProblem;

/// Smaller grid to keep the suite fast.
fn small_grid() -> GridSpec {
    GridSpec {
        pi_points: 3,
        sigma2_multipliers: vec![0.2, 0.5, 1.0],
        sigma2_beta: vec![1.0, 5.0],
        ..GridSpec::default()
    }
}

fn two_cluster_data(seed: u64, n_half: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let n = 2 * n_half;
    let mut x = normal_matrix(&mut r, n, p);
    for i in 0..n {
        if i < n_half {
            x[(i, 1)] += 0.9 * x[(i, 0)];
        } else {
            x[(i, 2)] -= 0.9 * x[(i, 0)];
        }
    }
    let z = (0..n).map(|i| if i < n_half { -1.0 } else { 1.0 } + 0.3 * normal(&mut r)).collect();
    (x, z)
}

fn adaptive_plan(z: &[f64]) -> WeightPlan {
    let cov = CovariateMatrix::from_column(z).unwrap();
    let tau = adaptive_bandwidths(&cov).unwrap();
    build_weight_plan(&cov, Bandwidth::PerAnchor(tau)).unwrap()
}

#[test]
fn covariate_free_mode_equals_all_ones_plan() {
    let (x, z) = two_cluster_data(30, 20, 5);
    let mut free = FitRequest::new(x.clone(), adaptive_plan(&z));
    free.mode = Mode::CovariateFree;
    free.grid = small_grid();
    let mut ones = FitRequest::new(x, WeightPlan::covariate_free(40));
    ones.grid = small_grid();
    let a = estimate_all(&free).unwrap();
    let b = estimate_all(&ones).unwrap();
    assert_eq!(a.graphs.len(), 40);
    for (ga, gb) in a.graphs.iter().zip(&b.graphs) {
        assert_eq!(ga.raw, gb.raw);
        assert_eq!(ga.prob, gb.prob);
        assert_eq!(ga.prob, a.graphs[0].prob);
    }
}

#[test]
fn separated_levels_match_separate_estimation() {
    let (x, _) = two_cluster_data(31, 25, 4);
    let z: Vec<f64> = (0..50).map(|i| if i < 25 { 1.0 } else { 2.0 }).collect();
    let cov = CovariateMatrix::from_column(&z).unwrap();
    let plan = build_weight_plan(&cov, Bandwidth::Fixed(0.01)).unwrap();
    let grid = GridSpec {
        pi: Some(vec![0.1, 0.3, 0.5]),
        sigma2: Some(vec![0.8]),
        sigma2_beta: vec![2.0],
        ..GridSpec::default()
    };
    let mut joint = FitRequest::new(x.clone(), plan);
    joint.grid = grid.clone();
    joint.standardize = false;
    let joint = estimate_all(&joint).unwrap();
    for (level, rows) in [(0usize, 0..25), (1, 25..50)] {
        let sub = x.rows(rows.start, 25).into_owned();
        let mut req = FitRequest::new(sub, WeightPlan::covariate_free(25));
        req.grid = grid.clone();
        req.standardize = false;
        let separate = estimate_all(&req).unwrap();
        for i in rows {
            let a = &joint.graphs[i].raw;
            let b = &separate.graphs[i - 25 * level].raw;
            assert!((a - b).amax() < 1e-6, "level {level} anchor {i}");
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let (x, z) = two_cluster_data(32, 15, 5);
    let mut req = FitRequest::new(x, adaptive_plan(&z));
    req.grid = small_grid();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_all(&req).unwrap())
    };
    let a = run(1);
    let b = run(4);
    for (ga, gb) in a.graphs.iter().zip(&b.graphs) {
        assert_eq!(ga.raw, gb.raw);
        assert_eq!(ga.adjacency, gb.adjacency);
    }
}

#[test]
fn anchor_permutation_is_equivariant() {
    let (x, z) = two_cluster_data(33, 12, 4);
    let n = 24;
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let xp = DMatrix::from_fn(n, 4, |i, c| x[(perm[i], c)]);
    let zp: Vec<f64> = perm.iter().map(|&i| z[i]).collect();
    let mut a = FitRequest::new(x, adaptive_plan(&z));
    a.grid = small_grid();
    let mut b = FitRequest::new(xp, adaptive_plan(&zp));
    b.grid = small_grid();
    let a = estimate_all(&a).unwrap();
    let b = estimate_all(&b).unwrap();
    for i in 0..n {
        let diff = (&b.graphs[i].prob - &a.graphs[perm[i]].prob).amax();
        assert!(diff < 1e-6, "anchor {i}: {diff}");
    }
}

#[test]
fn variable_permutation_conjugates_graphs() {
    let (x, z) = two_cluster_data(34, 15, 5);
    let perm = [2usize, 4, 0, 1, 3];
    let xp = DMatrix::from_fn(30, 5, |i, c| x[(i, perm[c])]);
    let mut a = FitRequest::new(x, adaptive_plan(&z));
    a.grid = small_grid();
    a.controls.tol = 1e-12;
    a.controls.max_sweeps = 5000;
    let mut b = a.clone();
    b.data = xp;
    let a = estimate_all(&a).unwrap();
    let b = estimate_all(&b).unwrap();
    for (ga, gb) in a.graphs.iter().zip(&b.graphs) {
        for r in 0..5 {
            for c in 0..5 {
                let diff = (gb.prob[(r, c)] - ga.prob[(perm[r], perm[c])]).abs();
                assert!(diff < 1e-4, "({r}, {c}): {diff}");
            }
        }
    }
}

#[test]
fn outputs_are_symmetric_probabilities() {
    let (x, z) = two_cluster_data(35, 15, 6);
    let mut req = FitRequest::new(x, adaptive_plan(&z));
    req.grid = small_grid();
    req.anchors = Some(vec![0, 29, 7]);
    let out = estimate_all(&req).unwrap();
    assert!(out.failures.is_empty());
    let ids: Vec<usize> = out.graphs.iter().map(|g| g.individual).collect();
    assert_eq!(ids, vec![0, 29, 7]);
    for g in &out.graphs {
        for r in 0..6 {
            assert_eq!(g.prob[(r, r)], 0.0);
            assert_eq!(g.adjacency[(r, r)], 0);
            for c in 0..6 {
                assert_eq!(g.prob[(r, c)], g.prob[(c, r)]);
                assert!((0.0..=1.0).contains(&g.prob[(r, c)]));
                assert_eq!(g.adjacency[(r, c)], u8::from(g.prob[(r, c)] > 0.5));
            }
        }
        assert_eq!(g.hyper_provenance.len(), 6);
    }
}

#[test]
fn single_individual_is_the_unweighted_fit() {
    let mut r = rng(36);
    let x = normal_matrix(&mut r, 1, 4);
    let mut req = FitRequest::new(x.clone(), WeightPlan::covariate_free(1));
    req.standardize = false;
    let out = estimate_all(&req).unwrap();
    let grid = req.grid.resolve(4).unwrap();
    for j in 0..4 {
        let problem = RegressionProblem::from_data(&x, j, vec![1.0]).unwrap();
        let set = AnchorSet::from_problems(&[problem]);
        let (fits, _) = average_over_pi(&set, &grid, Sigma2Strategy::AnchorRelative, &req.controls).unwrap();
        for (c, k) in (0..4).filter(|&k| k != j).enumerate() {
            assert_eq!(out.graphs[0].raw[(j, k)], fits[0].alpha_bar[c]);
        }
    }
}

#[test]
fn near_duplicate_variables_are_linked() {
    let mut hits = 0;
    for seed in 0..50 {
        let mut r = rng(400 + seed);
        let n = 50;
        let x = DMatrix::from_fn(n, 3, |_, _| normal(&mut r));
        let mut x = x;
        for i in 0..n {
            x[(i, 1)] = x[(i, 0)] + 0.1 * normal(&mut r);
        }
        let mut req = FitRequest::new(x, WeightPlan::covariate_free(n));
        req.mode = Mode::CovariateFree;
        req.anchors = Some(vec![0]);
        let g = &estimate_all(&req).unwrap().graphs[0];
        if g.prob[(0, 1)] > 0.5 && g.prob[(0, 2)] < 0.5 {
            hits += 1;
        }
    }
    assert!(hits >= 48, "{hits} of 50");
}

#[test]
fn two_variables_reduce_to_single_predictor_fits() {
    let mut r = rng(37);
    let n = 40;
    let mut x = normal_matrix(&mut r, n, 2);
    for i in 0..n {
        x[(i, 1)] += 2.0 * x[(i, 0)];
    }
    let req = FitRequest::new(x, WeightPlan::covariate_free(n));
    let fit = fit_one_regression(0, 0, &req).unwrap();
    assert_eq!(fit.alpha_bar.len(), 1);
    assert!(fit.alpha_bar[0] > 0.99);
    let g = &estimate_all(&req).unwrap().graphs[0];
    assert_eq!(g.raw[(0, 1)], fit.alpha_bar[0]);
    assert_eq!(g.adjacency[(0, 1)], 1);
}

#[test]
fn overflowing_data_is_reported_not_fatal() {
    let mut r = rng(38);
    let mut x = normal_matrix(&mut r, 10, 3);
    x[(0, 2)] = 1e200;
    let mut req = FitRequest::new(x, WeightPlan::covariate_free(10));
    req.standardize = false;
    req.anchors = Some(vec![0, 1]);
    let out = estimate_all(&req).unwrap();
    assert!(!out.failures.is_empty());
    for f in &out.failures {
        let g = out.graphs.iter().find(|g| g.individual == f.anchor).unwrap();
        let j = f.response;
        for k in (0..3).filter(|&k| k != j) {
            assert!(g.raw[(j, k)].is_nan());
            assert!(g.prob[(j, k)].is_nan());
            assert_eq!(g.adjacency[(j, k)], 0);
        }
    }
}

#[test]
fn invalid_requests_are_rejected() {
    let x = DMatrix::from_element(4, 3, 1.0);
    let mut req = FitRequest::new(x.clone(), WeightPlan::covariate_free(3));
    assert!(estimate_all(&req).is_err());
    req.weight_plan = WeightPlan::covariate_free(4);
    req.threshold = 1.0;
    assert!(estimate_all(&req).is_err());
    req.threshold = 0.5;
    req.anchors = Some(vec![4]);
    assert!(estimate_all(&req).is_err());
    let single = FitRequest::new(DMatrix::from_element(4, 1, 1.0), WeightPlan::covariate_free(4));
    assert!(estimate_all(&single).is_err());
    assert!(fit_one_regression(0, 3, &FitRequest::new(x, WeightPlan::covariate_free(4))).is_err());
}

fn prob_matrix(p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(0.0f64..=1.0, p * p).prop_map(move |v| {
        let mut m = DMatrix::from_vec(p, p, v);
        m.fill_diagonal(0.0);
        m
    })
}

proptest! {
    #[test]
    fn symmetrize_is_symmetric_and_idempotent(a in (2usize..8).prop_flat_map(prob_matrix)) {
        let s = symmetrize(&a).unwrap();
        prop_assert_eq!(&s, &s.transpose());
        prop_assert_eq!(symmetrize(&s).unwrap(), s.clone());
        for v in s.iter() {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn threshold_is_monotone(a in (2usize..8).prop_flat_map(prob_matrix), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let s = symmetrize(&a).unwrap();
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let loose = threshold_graph(&s, lo);
        let strict = threshold_graph(&s, hi);
        prop_assert_eq!(&loose, &loose.transpose());
        for (l, h) in loose.iter().zip(strict.iter()) {
            prop_assert!(h <= l);
        }
        for d in 0..s.nrows() {
            prop_assert_eq!(loose[(d, d)], 0);
        }
    }
}
