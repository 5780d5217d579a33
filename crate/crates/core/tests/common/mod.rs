#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wpl::simulation::rng_for;
use wpl::vi::RegressionProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_for(seed, 7)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_matrix<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| normal(rng))
}

/// Correlated predictors, a sparse true coefficient vector and weights that
/// include exact zeros.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, k: usize) -> RegressionProblem {
    let mut x = normal_matrix(rng, n, k);
    for c in 1..k {
        let rho: f64 = rng.random_range(-0.8..0.8);
        for i in 0..n {
            x[(i, c)] = rho * x[(i, c - 1)] + (1.0 - rho * rho).sqrt() * x[(i, c)];
        }
    }
    let scale: f64 = rng.random_range(0.2..3.0);
    x *= scale;
    let beta: Vec<f64> = (0..k)
        .map(|_| {
            if rng.random_bool(0.3) {
                rng.random_range(-2.0..2.0)
            } else {
                0.0
            }
        })
        .collect();
    let noise: f64 = rng.random_range(0.1..2.0);
    let y: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|c| x[(i, c)] * beta[c]).sum::<f64>() + noise * normal(rng))
        .collect();
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    for v in w.iter_mut() {
        if rng.random_bool(0.1) {
            *v = 0.0;
        }
    }
    w[0] = 1.0;
    RegressionProblem::new(y, x, w).unwrap()
}
