//! Gaussian kernel weights over covariates and the two-step adaptive bandwidth.
//!
//! Every anchor individual `l` gets a row of weights `w_l(z_i)` measuring how
//! similar individual `i` is to `l` in covariate space. The kernel is the
//! Gaussian density in the Euclidean distance, rescaled so that the self
//! weight is exactly one.
//!
//! Bandwidths are chosen per anchor: a Silverman pilot bandwidth `h` drives a
//! pilot kernel density estimate `k̂`, and the anchor bandwidth is
//! `τ_l = h / √k̂(z_l)`, so sparse regions of covariate space smooth more.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, WplError};

const SILVERMAN_CONSTANT: f64 = 1.06;

/// Covariates, one row per individual.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    values: DMatrix<f64>,
}

impl CovariateMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(invalid("covariate matrix must have at least one row and one column"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("covariate matrix contains non-finite entries"));
        }
        Ok(Self { values })
    }

    /// Builds a one-dimensional covariate from a slice.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
    }

    /// Builds from row vectors; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(WplError::DimensionMismatch("ragged covariate rows".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, c| rows[i][c]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values.column(c).iter().copied().collect()
    }

    /// Centers each column and scales it to unit sample standard deviation.
    /// Constant columns are only centered.
    pub fn standardized(&self) -> Self {
        let mut values = self.values.clone();
        for c in 0..values.ncols() {
            let col = self.column(c);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = sample_sd(&col);
            for v in values.column_mut(c).iter_mut() {
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        Self { values }
    }

    fn squared_distance(&self, a: usize, b: usize) -> f64 {
        self.values
            .row(a)
            .iter()
            .zip(self.values.row(b).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}

/// Per-anchor kernel scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthVector(Vec<f64>);

impl BandwidthVector {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(invalid("bandwidth vector is empty"));
        }
        if let Some(bad) = tau.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(invalid(format!("bandwidth must be positive and finite, got {bad}")));
        }
        Ok(Self(tau))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How the kernel scale of each anchor is determined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// One scale per anchor, usually from [`adaptive_bandwidths`].
    PerAnchor(BandwidthVector),
    /// The same scale for every anchor.
    Fixed(f64),
    /// All weights equal one.
    CovariateFree,
}

/// Kernel weights of every individual relative to every anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPlan {
    /// Row `l` holds `w_l(z_i)` for all `i`.
    pub weights: DMatrix<f64>,
    pub bandwidth: Bandwidth,
    /// True when weights are scaled to unit self weight.
    pub normalized: bool,
}

impl WeightPlan {
    /// The all-ones plan for `n` individuals.
    pub fn covariate_free(n: usize) -> Self {
        Self {
            weights: DMatrix::from_element(n, n, 1.0),
            bandwidth: Bandwidth::CovariateFree,
            normalized: true,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn row(&self, anchor: usize) -> Vec<f64> {
        self.weights.row(anchor).iter().copied().collect()
    }
}

/// Gaussian kernel in Euclidean distance with unit self weight:
/// `exp(-‖anchor - other‖² / (2τ²))`.
pub fn kernel_weight(anchor: &[f64], other: &[f64], tau: f64) -> Result<f64> {
    if anchor.len() != other.len() {
        return Err(WplError::DimensionMismatch(format!(
            "covariate points have dimensions {} and {}",
            anchor.len(),
            other.len()
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("bandwidth must be positive and finite, got {tau}")));
    }
    if anchor.iter().chain(other).any(|v| !v.is_finite()) {
        return Err(invalid("covariate point has non-finite coordinates"));
    }
    let d2: f64 = anchor.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(gaussian_kernel(d2, tau))
}

#[inline]
fn gaussian_kernel(squared_distance: f64, tau: f64) -> f64 {
    (-squared_distance / (2.0 * tau * tau)).exp()
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Silverman's rule of thumb `1.06 · sd · n^(-1/5)` for one covariate column.
pub fn silverman_bandwidth(covariates: &CovariateMatrix, dim: usize) -> Result<f64> {
    if dim >= covariates.dim() {
        return Err(invalid(format!(
            "column {dim} out of range for {} covariate columns",
            covariates.dim()
        )));
    }
    let n = covariates.n();
    if n < 2 {
        return Err(invalid("at least two individuals are needed for a bandwidth"));
    }
    let sd = sample_sd(&covariates.column(dim));
    if !(sd > 0.0) {
        return Err(WplError::DegenerateCovariate(format!(
            "covariate column {dim} has zero standard deviation"
        )));
    }
    Ok(SILVERMAN_CONSTANT * sd * (n as f64).powf(-0.2))
}

/// Pooled pilot bandwidth: the harmonic mean of the per-column Silverman
/// bandwidths over the non-degenerate columns.
pub fn pilot_bandwidth(covariates: &CovariateMatrix) -> Result<f64> {
    let mut inv_sum = 0.0;
    let mut count = 0usize;
    for c in 0..covariates.dim() {
        match silverman_bandwidth(covariates, c) {
            Ok(h) => {
                inv_sum += 1.0 / h;
                count += 1;
            }
            Err(WplError::DegenerateCovariate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if count == 0 {
        return Err(WplError::DegenerateCovariate(
            "every covariate column is constant".into(),
        ));
    }
    Ok(count as f64 / inv_sum)
}

/// Pilot kernel density estimate at every individual, using a product
/// Gaussian kernel with scale `h` in each coordinate.
pub fn pilot_density(covariates: &CovariateMatrix, h: f64) -> Vec<f64> {
    let n = covariates.n();
    let d = covariates.dim() as f64;
    let norm = (2.0 * std::f64::consts::PI).sqrt() * h;
    let scale = 1.0 / (n as f64 * norm.powf(d));
    (0..n)
        .map(|l| {
            let s: f64 = (0..n)
                .map(|i| gaussian_kernel(covariates.squared_distance(l, i), h))
                .sum();
            s * scale
        })
        .collect()
}

/// Two-step adaptive bandwidths `τ_i = h / √k̂(z_i)`.
pub fn adaptive_bandwidths(covariates: &CovariateMatrix) -> Result<BandwidthVector> {
    let h = pilot_bandwidth(covariates)?;
    let density = pilot_density(covariates, h);
    BandwidthVector::new(density.iter().map(|k| h / k.sqrt()).collect())
}

/// Fills the weight matrix for the given bandwidth choice.
pub fn build_weight_plan(covariates: &CovariateMatrix, bandwidth: Bandwidth) -> Result<WeightPlan> {
    let n = covariates.n();
    let tau_of: Box<dyn Fn(usize) -> f64> = match &bandwidth {
        Bandwidth::CovariateFree => return Ok(WeightPlan::covariate_free(n)),
        Bandwidth::Fixed(t) => {
            if !(t.is_finite() && *t > 0.0) {
                return Err(invalid(format!("bandwidth must be positive and finite, got {t}")));
            }
            let t = *t;
            Box::new(move |_| t)
        }
        Bandwidth::PerAnchor(tau) => {
            if tau.len() != n {
                return Err(WplError::DimensionMismatch(format!(
                    "{} bandwidths for {n} individuals",
                    tau.len()
                )));
            }
            let tau = tau.as_slice().to_vec();
            Box::new(move |l| tau[l])
        }
    };
    let weights = DMatrix::from_fn(n, n, |l, i| {
        gaussian_kernel(covariates.squared_distance(l, i), tau_of(l))
    });
    Ok(WeightPlan {
        weights,
        bandwidth,
        normalized: true,
    })
}
