mod common;

use common::rng;
use nalgebra::DMatrix;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use wpl::kernel_weights::CovariateMatrix;
use wpl::simulation::{
    auc, evaluate_individual, gen_discrete, gen_robustness, greedy_sort_covariates,
    sample_mvn_precision, sensitivity_specificity, Contamination, DiscreteKind, Noise,
    PrecisionSpec, SimSetting,
};
use wpl::WplError;

fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
    centered.transpose() * &centered / (n - 1.0)
}

#[test]
fn mvn_draws_have_the_target_covariance() {
    let mut r = rng(50);
    let a = DMatrix::from_fn(4, 4, |_, _| r.random_range(-1.0..1.0));
    let omega = &a * a.transpose() + DMatrix::identity(4, 4) * 0.5;
    let target = omega.clone().try_inverse().unwrap();
    let x = sample_mvn_precision(&omega, 100_000, &mut r).unwrap();
    let err = (sample_cov(&x) - &target).norm() / target.norm();
    assert!(err < 0.05, "relative error {err}");
}

#[test]
fn scaled_identity_precision_gives_scaled_variances() {
    let mut r = rng(51);
    let x = sample_mvn_precision(&(DMatrix::identity(3, 3) * 4.0), 100_000, &mut r).unwrap();
    let cov = sample_cov(&x);
    for j in 0..3 {
        assert!((cov[(j, j)] - 0.25).abs() < 0.01, "{}", cov[(j, j)]);
        for k in 0..j {
            assert!(cov[(j, k)].abs() < 0.01);
        }
    }
}

#[test]
fn sample_partial_correlations_follow_the_truth() {
    let sim = gen_discrete(DiscreteKind::Dependent, 15.0, 1, 1, 10, 52).unwrap();
    for (omega, truth) in sim.spec.omega.iter().zip(&sim.spec.truth) {
        let mut r = rng(53);
        let x = sample_mvn_precision(omega, 100_000, &mut r).unwrap();
        let prec = sample_cov(&x).try_inverse().unwrap();
        for j in 0..10 {
            for k in 0..10 {
                if j == k {
                    continue;
                }
                let pc = -prec[(j, k)] / (prec[(j, j)] * prec[(k, k)]).sqrt();
                assert_eq!(u8::from(pc.abs() > 0.05), truth[(j, k)], "({j}, {k}): {pc}");
            }
        }
    }
}

#[test]
fn non_positive_definite_precision_is_rejected() {
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(
        PrecisionSpec::from_omegas(vec![bad.clone()]),
        Err(WplError::NotPositiveDefinite(_))
    ));
    assert!(sample_mvn_precision(&bad, 10, &mut rng(0)).is_err());
}

#[test]
fn generation_is_deterministic_per_seed() {
    for kind in SimSetting::KINDS {
        let setting = SimSetting::preset(kind, 6).unwrap();
        let a = setting.generate(11).unwrap();
        let b = setting.generate(11).unwrap();
        let c = setting.generate(12).unwrap();
        assert_eq!(a, b, "{kind}");
        assert_ne!(a.data.data(), c.data.data(), "{kind}");
        assert_eq!(a.spec.n(), a.data.n());
        assert_eq!(a.data.p(), 6);
    }
}

#[test]
fn unknown_setting_lists_the_valid_ones() {
    let err = SimSetting::preset("foo", 5).unwrap_err().to_string();
    for kind in SimSetting::KINDS {
        assert!(err.contains(kind), "{err}");
    }
}

#[test]
fn zero_contamination_reproduces_the_base() {
    let base = SimSetting::preset("discrete-dependent", 6).unwrap();
    let clean = base.generate(5).unwrap();
    let zero = gen_robustness(&base, Some(Contamination { fraction: 0.0, shift: 3.0 }), Noise::Gaussian, 5).unwrap();
    assert_eq!(zero.data, clean.data);
    assert!(zero.contaminated_rows.is_empty());
}

#[test]
fn contamination_replaces_the_requested_rows() {
    let base = SimSetting::preset("discrete-dependent", 6).unwrap();
    let clean = base.generate(5).unwrap();
    let dirty = gen_robustness(&base, Some(Contamination { fraction: 0.05, shift: 3.0 }), Noise::Gaussian, 5).unwrap();
    assert_eq!(dirty.contaminated_rows.len(), 5);
    for i in 0..100 {
        let same = clean.data.data().row(i) == dirty.data.data().row(i);
        assert_eq!(same, !dirty.contaminated_rows.contains(&i), "row {i}");
    }
    assert!(gen_robustness(&base, Some(Contamination { fraction: 0.7, shift: 3.0 }), Noise::Gaussian, 5).is_err());
}

/// Two-sided Kolmogorov–Smirnov statistic against a normal distribution.
fn ks_normal(mut values: Vec<f64>, sd: f64) -> f64 {
    let dist = Normal::new(0.0, sd).unwrap();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = dist.cdf(*v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn t_noise_with_huge_df_is_gaussian() {
    let base = SimSetting::DiscreteDependent { c: 15.0, n1: 50, n2: 50, dim: 5 };
    let omega = base.generate(0).unwrap().spec.omega[0].clone();
    let sd = omega.try_inverse().unwrap()[(4, 4)].sqrt();
    let mut values = Vec::new();
    let mut heavy = Vec::new();
    for seed in 0..100 {
        let sim = gen_robustness(&base, None, Noise::T { df: 1e6 }, seed).unwrap();
        values.extend((0..50).map(|i| sim.data.data()[(i, 4)]));
        let sim = gen_robustness(&base, None, Noise::T { df: 1.5 }, seed).unwrap();
        heavy.extend((0..50).map(|i| sim.data.data()[(i, 4)]));
    }
    let critical = 1.36 / (values.len() as f64).sqrt();
    assert!(ks_normal(values, sd) < critical);
    assert!(ks_normal(heavy, sd) > critical);
}

fn random_symmetric_u8<R: Rng>(r: &mut R, p: usize, density: f64) -> DMatrix<u8> {
    let mut m = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in j + 1..p {
            let v = u8::from(r.random_bool(density));
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    m
}

#[test]
fn metrics_match_brute_force() {
    let mut r = rng(60);
    for _ in 0..1000 {
        let p = r.random_range(2..12);
        let (d1, d2) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let truth = random_symmetric_u8(&mut r, p, d1);
        let est = random_symmetric_u8(&mut r, p, d2);
        // Coarse scores so ties occur.
        let mut prob = DMatrix::zeros(p, p);
        for j in 0..p {
            for k in j + 1..p {
                let v = (r.random_range(0..6) as f64) / 5.0;
                prob[(j, k)] = v;
                prob[(k, j)] = v;
            }
        }
        let (mut tp, mut fneg, mut tn, mut fp) = (0, 0, 0, 0);
        let (mut pos_scores, mut neg_scores) = (Vec::new(), Vec::new());
        for j in 0..p {
            for k in j + 1..p {
                match (truth[(j, k)], est[(j, k)]) {
                    (1, 1) => tp += 1,
                    (1, _) => fneg += 1,
                    (_, 0) => tn += 1,
                    _ => fp += 1,
                }
                if truth[(j, k)] == 1 {
                    pos_scores.push(prob[(j, k)]);
                } else {
                    neg_scores.push(prob[(j, k)]);
                }
            }
        }
        let ss = sensitivity_specificity(&truth, &est).unwrap();
        assert_eq!(ss.sensitivity, (tp + fneg > 0).then(|| tp as f64 / (tp + fneg) as f64));
        assert_eq!(ss.specificity, (tn + fp > 0).then(|| tn as f64 / (tn + fp) as f64));

        let metrics = evaluate_individual(0, &truth, &est, Some(&prob)).unwrap();
        let expected_auc = if pos_scores.is_empty() || neg_scores.is_empty() {
            None
        } else {
            let ordered = pos_scores
                .iter()
                .map(|s| neg_scores.iter().filter(|n| *n < s).count())
                .sum::<usize>();
            Some(ordered as f64 / (pos_scores.len() * neg_scores.len()) as f64)
        };
        assert_eq!(metrics.auc, expected_auc);
    }
}

#[test]
fn auc_examples() {
    assert_eq!(auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
    assert_eq!(auc(&[0, 1], &[0.5, 0.5]).unwrap(), 0.0);
    assert!(matches!(auc(&[1, 1], &[0.5, 0.4]), Err(WplError::UndefinedMetric(_))));
}

#[test]
fn greedy_sort_takes_the_nearest_remaining_point() {
    let mut r = rng(61);
    for _ in 0..200 {
        let n = r.random_range(1..25);
        let d = r.random_range(1..4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(0..5) as f64).collect())
            .collect();
        let cov = CovariateMatrix::from_rows(&rows).unwrap();
        let order = greedy_sort_covariates(&cov);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        assert_eq!(order[0], 0);
        let dist = |a: usize, b: usize| -> f64 { rows[a].iter().zip(&rows[b]).map(|(x, y)| (x - y) * (x - y)).sum() };
        for step in 1..n {
            let prev = order[step - 1];
            let rest = &order[step..];
            let best = rest
                .iter()
                .copied()
                .min_by(|&a, &b| dist(prev, a).total_cmp(&dist(prev, b)).then(a.cmp(&b)))
                .unwrap();
            assert_eq!(order[step], best);
        }
    }
}
