//! Weighted spike-and-slab regression solved by block mean-field variational
//! inference.
//!
//! The working model for one response is
//! `x_ij | x_i,-j ~ N(x_i,-jᵀ β, σ² / w_i)` with the prior
//! `β_k ~ π N(0, σ² σ_β²) + (1 - π) δ_0`. The variational family factorizes
//! over predictors, each factor a spike-and-slab with free parameters
//! `(α_k, μ_k, s_k²)`.
//!
//! Everything the updates and the ELBO need from the data is the weighted
//! Gram matrix `Xᵀ W X`, the weighted cross products `Xᵀ W y`, the weighted
//! response energy `yᵀ W y` and the weight mass `Σ w_i`; see
//! [`SufficientStats`]. A sweep therefore costs `O(k²)` regardless of `n`.
//!
//! The likelihood is the tempered form `Π_i N(x_ij; ·, σ²)^{w_i}`, whose log
//! is `-(W/2) log(2πσ²) - Σ_i w_i r_i² / (2σ²)` with `W = Σ w_i`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, WplError};

/// Inclusion probabilities are kept inside `[ε, 1 - ε]`.
pub const ALPHA_EPS: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One weighted regression of a response on its predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    response: Vec<f64>,
    predictors: DMatrix<f64>,
    weights: Vec<f64>,
}

impl RegressionProblem {
    pub fn new(response: Vec<f64>, predictors: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if predictors.nrows() != n || weights.len() != n {
            return Err(WplError::DimensionMismatch(format!(
                "response has {n} rows, predictors {} rows, weights {} entries",
                predictors.nrows(),
                weights.len()
            )));
        }
        if predictors.ncols() == 0 {
            return Err(invalid("regression needs at least one predictor"));
        }
        if response.iter().chain(predictors.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("regression data contain non-finite values"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(invalid("at least one weight must be strictly positive"));
        }
        Ok(Self {
            response,
            predictors,
            weights,
        })
    }

    /// Regresses column `j` of `data` on the remaining columns.
    pub fn from_data(data: &DMatrix<f64>, j: usize, weights: Vec<f64>) -> Result<Self> {
        if j >= data.ncols() {
            return Err(invalid(format!("response column {j} out of range")));
        }
        let response = data.column(j).iter().copied().collect();
        let predictors = data.clone().remove_column(j);
        Self::new(response, predictors, weights)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    /// Number of predictors.
    pub fn k(&self) -> usize {
        self.predictors.ncols()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn predictors(&self) -> &DMatrix<f64> {
        &self.predictors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stats(&self) -> SufficientStats {
        let k = self.k();
        let x = &self.predictors;
        let mut gram = DMatrix::zeros(k, k);
        let mut xty = vec![0.0; k];
        let mut yty = 0.0;
        for (i, (&w, &y)) in self.weights.iter().zip(&self.response).enumerate() {
            if w == 0.0 {
                continue;
            }
            yty += w * y * y;
            for a in 0..k {
                let wa = w * x[(i, a)];
                xty[a] += wa * y;
                for b in a..k {
                    gram[(a, b)] += wa * x[(i, b)];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        SufficientStats {
            gram,
            xty,
            yty,
            weight_mass: self.weights.iter().sum(),
        }
    }
}

/// Weighted second moments of one regression.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `Xᵀ W X`
    pub gram: DMatrix<f64>,
    /// `Xᵀ W y`
    pub xty: Vec<f64>,
    /// `yᵀ W y`
    pub yty: f64,
    /// `Σ w_i`
    pub weight_mass: f64,
}

impl SufficientStats {
    /// Extracts the statistics for response `j` from the weighted Gram matrix
    /// `Xᵀ W X` of all variables.
    pub fn from_full_gram(full: &DMatrix<f64>, weight_mass: f64, j: usize) -> Self {
        let p = full.nrows();
        let idx: Vec<usize> = (0..p).filter(|&c| c != j).collect();
        let gram = DMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])]);
        let xty = idx.iter().map(|&c| full[(c, j)]).collect();
        Self {
            gram,
            xty,
            yty: full[(j, j)],
            weight_mass,
        }
    }

    pub fn k(&self) -> usize {
        self.xty.len()
    }

    /// Weighted mean square of the response, `yᵀWy / Σw`.
    pub fn response_energy(&self) -> f64 {
        self.yty / self.weight_mass
    }
}

/// Prior hyperparameters `(π, σ², σ_β²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperChoice {
    pub pi: f64,
    pub sigma2: f64,
    pub sigma2_beta: f64,
}

impl HyperChoice {
    pub fn new(pi: f64, sigma2: f64, sigma2_beta: f64) -> Result<Self> {
        let h = Self {
            pi,
            sigma2,
            sigma2_beta,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(invalid(format!("pi must lie in (0, 1), got {}", self.pi)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(invalid(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.sigma2_beta.is_finite() && self.sigma2_beta > 0.0) {
            return Err(invalid(format!(
                "sigma2_beta must be positive, got {}",
                self.sigma2_beta
            )));
        }
        Ok(())
    }
}

/// Free parameters of the factorized posterior plus fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub s2: Vec<f64>,
    pub elbo: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ELBO after initialization and after every sweep.
    pub elbo_trace: Vec<f64>,
}

impl VariationalState {
    /// The neutral start `α = π`, `μ = 0`.
    pub fn initial(k: usize, hyper: &HyperChoice, s2: Vec<f64>) -> Self {
        Self {
            alpha: vec![clamp_alpha(hyper.pi); k],
            mu: vec![0.0; k],
            s2,
            elbo: f64::NAN,
            iterations: 0,
            converged: false,
            elbo_trace: Vec::new(),
        }
    }

    /// Posterior means `α_k μ_k`.
    pub fn posterior_mean(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.mu).map(|(a, m)| a * m).collect()
    }
}

/// Stopping rule for coordinate ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitControls {
    pub max_sweeps: usize,
    /// Absolute ELBO change below which the fit is declared converged.
    pub tol: f64,
}

impl Default for FitControls {
    fn default() -> Self {
        Self {
            max_sweeps: 500,
            tol: 1e-6,
        }
    }
}

impl FitControls {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        Ok(())
    }
}

fn clamp_alpha(a: f64) -> f64 {
    a.clamp(ALPHA_EPS, 1.0 - ALPHA_EPS)
}

/// Logistic function without overflow for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Slab variances `s_k² = σ² / (1/σ_β² + Σ_i w_i x_ik²)`.
pub fn s2_from_stats(stats: &SufficientStats, hyper: &HyperChoice) -> Vec<f64> {
    (0..stats.k())
        .map(|k| hyper.sigma2 / (1.0 / hyper.sigma2_beta + stats.gram[(k, k)]))
        .collect()
}

/// `v = G r` with `r_k = α_k μ_k`.
fn gram_times_mean(stats: &SufficientStats, alpha: &[f64], mu: &[f64]) -> Vec<f64> {
    let k = stats.k();
    let r: Vec<f64> = alpha.iter().zip(mu).map(|(a, m)| a * m).collect();
    (0..k)
        .map(|a| (0..k).map(|b| stats.gram[(a, b)] * r[b]).sum())
        .collect()
}

/// Gauss–Seidel pass over the slab means, each using the freshest values of
/// the others: `μ_k = (s_k²/σ²) (Σ w x_k y - Σ_{m≠k} G_km α_m μ_m)`.
pub fn mu_batch_from_stats(
    stats: &SufficientStats,
    hyper: &HyperChoice,
    alpha: &[f64],
    mu: &[f64],
    s2: &[f64],
) -> Vec<f64> {
    let k = stats.k();
    let mut mu = mu.to_vec();
    let mut v = gram_times_mean(stats, alpha, &mu);
    for c in 0..k {
        let r_old = alpha[c] * mu[c];
        let partial = stats.xty[c] - (v[c] - stats.gram[(c, c)] * r_old);
        mu[c] = s2[c] / hyper.sigma2 * partial;
        let delta = alpha[c] * mu[c] - r_old;
        if delta != 0.0 {
            for a in 0..k {
                v[a] += stats.gram[(a, c)] * delta;
            }
        }
    }
    mu
}

/// Inclusion probabilities at a stationary slab mean:
/// `logit α_k = logit π + μ_k²/(2 s_k²) + log(s_k / (σ σ_β))`, clamped to `[ε, 1-ε]`.
pub fn alpha_from_mu(hyper: &HyperChoice, mu: &[f64], s2: &[f64]) -> Vec<f64> {
    let base = logit(hyper.pi);
    let prior_var = hyper.sigma2 * hyper.sigma2_beta;
    mu.iter()
        .zip(s2)
        .map(|(m, s)| {
            let z = base + m * m / (2.0 * s) + 0.5 * (s / prior_var).ln();
            clamp_alpha(logistic(z))
        })
        .collect()
}

/// Gauss–Seidel pass over the inclusion probabilities. Each `α_k` maximizes
/// the ELBO given everything else:
/// `logit α_k = logit π + log(s_k/(σσ_β)) + μ_k c_k/σ² - μ_k²/(2 s_k²)`,
/// where `c_k = Σ w x_k y - Σ_{m≠k} G_km α_m μ_m` uses the freshest values.
/// When `μ_k = s_k² c_k / σ²` this is exactly [`alpha_from_mu`].
pub fn alpha_batch_from_stats(
    stats: &SufficientStats,
    hyper: &HyperChoice,
    alpha: &[f64],
    mu: &[f64],
    s2: &[f64],
) -> Vec<f64> {
    let k = stats.k();
    let base = logit(hyper.pi);
    let prior_var = hyper.sigma2 * hyper.sigma2_beta;
    let mut alpha = alpha.to_vec();
    let mut v = gram_times_mean(stats, &alpha, mu);
    for c in 0..k {
        let r_old = alpha[c] * mu[c];
        let partial = stats.xty[c] - (v[c] - stats.gram[(c, c)] * r_old);
        let z = base + 0.5 * (s2[c] / prior_var).ln() + mu[c] * partial / hyper.sigma2
            - mu[c] * mu[c] / (2.0 * s2[c]);
        alpha[c] = clamp_alpha(logistic(z));
        let delta = alpha[c] * mu[c] - r_old;
        if delta != 0.0 {
            for a in 0..k {
                v[a] += stats.gram[(a, c)] * delta;
            }
        }
    }
    alpha
}

/// Expected weighted residual sum of squares `E_q[Σ_i w_i (y_i - x_iᵀβ)²]`.
pub fn expected_wrss(stats: &SufficientStats, alpha: &[f64], mu: &[f64], s2: &[f64]) -> f64 {
    let k = stats.k();
    let v = gram_times_mean(stats, alpha, mu);
    let mut e = stats.yty;
    for c in 0..k {
        let r = alpha[c] * mu[c];
        e += -2.0 * stats.xty[c] * r + r * v[c]
            + stats.gram[(c, c)] * (alpha[c] * (mu[c] * mu[c] + s2[c]) - r * r);
    }
    // Rounding can push an exact-fit residual slightly negative.
    e.max(0.0)
}

/// `KL(q_k ‖ prior)` summed over predictors.
pub fn kl_to_prior(hyper: &HyperChoice, alpha: &[f64], mu: &[f64], s2: &[f64]) -> f64 {
    let prior_var = hyper.sigma2 * hyper.sigma2_beta;
    let (lp, lq) = (hyper.pi.ln(), (1.0 - hyper.pi).ln());
    alpha
        .iter()
        .zip(mu)
        .zip(s2)
        .map(|((&a, &m), &s)| {
            let bern = a * (a.ln() - lp) + (1.0 - a) * ((1.0 - a).ln() - lq);
            let slab = 0.5 * ((s + m * m) / prior_var - 1.0 - (s / prior_var).ln());
            bern + a * slab
        })
        .sum()
}

/// Closed-form ELBO from sufficient statistics.
pub fn elbo_from_stats(
    stats: &SufficientStats,
    hyper: &HyperChoice,
    alpha: &[f64],
    mu: &[f64],
    s2: &[f64],
) -> f64 {
    let e = expected_wrss(stats, alpha, mu, s2);
    let loglik = -0.5 * stats.weight_mass * (LN_2PI + hyper.sigma2.ln()) - e / (2.0 * hyper.sigma2);
    loglik - kl_to_prior(hyper, alpha, mu, s2)
}

/// Coordinate ascent from the neutral start on precomputed statistics.
pub fn fit_stats(
    stats: &SufficientStats,
    hyper: &HyperChoice,
    controls: &FitControls,
) -> Result<VariationalState> {
    hyper.validate()?;
    controls.validate()?;
    if !(stats.weight_mass > 0.0) {
        return Err(invalid("total weight must be positive"));
    }
    let s2 = s2_from_stats(stats, hyper);
    let mut state = VariationalState::initial(stats.k(), hyper, s2);
    let mut current = elbo_from_stats(stats, hyper, &state.alpha, &state.mu, &state.s2);
    if !current.is_finite() {
        return Err(WplError::NumericalFailure {
            sweep: 0,
            reason: "initial ELBO is not finite".into(),
        });
    }
    state.elbo_trace.push(current);
    for sweep in 1..=controls.max_sweeps {
        state.mu = mu_batch_from_stats(stats, hyper, &state.alpha, &state.mu, &state.s2);
        state.alpha = alpha_batch_from_stats(stats, hyper, &state.alpha, &state.mu, &state.s2);
        let next = elbo_from_stats(stats, hyper, &state.alpha, &state.mu, &state.s2);
        if !next.is_finite() {
            return Err(WplError::NumericalFailure {
                sweep,
                reason: "ELBO is not finite".into(),
            });
        }
        state.elbo_trace.push(next);
        state.iterations = sweep;
        let change = (next - current).abs();
        current = next;
        if change < controls.tol {
            state.converged = true;
            break;
        }
    }
    state.elbo = current;
    Ok(state)
}

/// Slab variances for a problem; independent of `α` and `μ`.
pub fn update_s2(problem: &RegressionProblem, hyper: &HyperChoice) -> Vec<f64> {
    s2_from_stats(&problem.stats(), hyper)
}

/// One Gauss–Seidel pass over the slab means.
pub fn update_mu_batch(
    state: &VariationalState,
    problem: &RegressionProblem,
    hyper: &HyperChoice,
) -> Vec<f64> {
    mu_batch_from_stats(&problem.stats(), hyper, &state.alpha, &state.mu, &state.s2)
}

/// One Gauss–Seidel pass over the inclusion probabilities.
pub fn update_alpha_batch(
    state: &VariationalState,
    problem: &RegressionProblem,
    hyper: &HyperChoice,
) -> Vec<f64> {
    alpha_batch_from_stats(&problem.stats(), hyper, &state.alpha, &state.mu, &state.s2)
}

/// ELBO of `state` for the given problem.
pub fn elbo(state: &VariationalState, problem: &RegressionProblem, hyper: &HyperChoice) -> f64 {
    elbo_from_stats(&problem.stats(), hyper, &state.alpha, &state.mu, &state.s2)
}

/// Fits one weighted spike-and-slab regression.
pub fn fit(
    problem: &RegressionProblem,
    hyper: &HyperChoice,
    controls: &FitControls,
) -> Result<VariationalState> {
    fit_stats(&problem.stats(), hyper, controls)
}
