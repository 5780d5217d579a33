//! Per-individual graph estimation.
//!
//! For every anchor `l` and variable `j`, variable `j` is regressed on the
//! others with the anchor's weight row. The resulting inclusion
//! probabilities form a non-symmetric `p × p` matrix per anchor, which is
//! averaged with its transpose and thresholded.
//!
//! Anchors whose weight rows are bit-identical (all anchors in
//! covariate-free mode, every member of a discrete level) share one set of
//! fits. Sums over anchors still run over every anchor in order, so results
//! do not depend on this sharing or on the thread count.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, WplError};
use crate::hyperparam::{average_over_pi, AnchorSet, AveragedFit, GridSpec, Sigma2Strategy};
use crate::kernel_weights::WeightPlan;
use crate::vi::{FitControls, SufficientStats};

/// Which hyperparameter scheme and weighting to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Grid over `(π, σ², σ_β²)` with softmax averaging over `π`.
    Standard,
    /// Empirical-Bayes `σ²`, grid over `(π, σ_β²)`.
    HighDimensional,
    /// All weights one, regardless of the supplied plan.
    CovariateFree,
}

#[derive(Debug, Clone)]
pub struct FitRequest {
    /// `n × p` observations.
    pub data: DMatrix<f64>,
    pub weight_plan: WeightPlan,
    /// Anchors to estimate, in output order; `None` means all individuals.
    pub anchors: Option<Vec<usize>>,
    pub threshold: f64,
    pub mode: Mode,
    pub grid: GridSpec,
    pub controls: FitControls,
    /// Divide every column by its root mean square before fitting, so the
    /// slab scale `σ_β²` means the same for every variable. Inclusion
    /// probabilities are reported for the original variables.
    pub standardize: bool,
}

impl FitRequest {
    pub fn new(data: DMatrix<f64>, weight_plan: WeightPlan) -> Self {
        Self {
            data,
            weight_plan,
            anchors: None,
            threshold: 0.5,
            mode: Mode::Standard,
            grid: GridSpec::default(),
            controls: FitControls::default(),
            standardize: true,
        }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    fn validate(&self) -> Result<()> {
        let (n, p) = (self.n(), self.p());
        if n == 0 || p < 2 {
            return Err(invalid("need at least one observation and two variables"));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("data contain non-finite values"));
        }
        if self.mode != Mode::CovariateFree
            && (self.weight_plan.weights.nrows() != n || self.weight_plan.weights.ncols() != n)
        {
            return Err(WplError::DimensionMismatch(format!(
                "weight plan is {}x{} for {n} individuals",
                self.weight_plan.weights.nrows(),
                self.weight_plan.weights.ncols()
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if let Some(a) = &self.anchors {
            if a.is_empty() {
                return Err(invalid("anchor list is empty"));
            }
            if let Some(bad) = a.iter().find(|&&l| l >= n) {
                return Err(invalid(format!("anchor {bad} out of range for {n} individuals")));
            }
        }
        self.controls.validate()
    }

    fn anchor_list(&self) -> Vec<usize> {
        self.anchors.clone().unwrap_or_else(|| (0..self.n()).collect())
    }

    /// The data as fitted: scaled columns when `standardize` is set.
    /// All-zero columns are left alone.
    fn fitted_data(&self) -> DMatrix<f64> {
        let mut x = self.data.clone();
        if self.standardize {
            let n = x.nrows() as f64;
            for mut col in x.column_iter_mut() {
                let rms = (col.norm_squared() / n).sqrt();
                if rms > 0.0 {
                    col /= rms;
                }
            }
        }
        x
    }

    fn weight_row(&self, l: usize) -> Vec<f64> {
        match self.mode {
            Mode::CovariateFree => vec![1.0; self.n()],
            _ => self.weight_plan.row(l),
        }
    }

    fn strategy(&self) -> Sigma2Strategy {
        match self.mode {
            Mode::HighDimensional => Sigma2Strategy::EmpiricalBayes,
            _ => self.grid.sigma2_strategy(),
        }
    }
}

/// Hyperparameters behind one response's averaged fit for one anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberProvenance {
    pub pi: f64,
    pub sigma2: f64,
    pub sigma2_beta: f64,
    pub elbo: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseProvenance {
    pub response: usize,
    pub members: Vec<MemberProvenance>,
}

impl ResponseProvenance {
    fn from_fit(response: usize, fit: &AveragedFit) -> Self {
        Self {
            response,
            members: fit
                .members
                .iter()
                .zip(&fit.weights)
                .map(|(m, w)| MemberProvenance {
                    pi: m.hyper.pi,
                    sigma2: m.hyper.sigma2,
                    sigma2_beta: m.hyper.sigma2_beta,
                    elbo: m.state.elbo,
                    weight: *w,
                })
                .collect(),
        }
    }
}

/// Estimated graph for one individual.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEstimate {
    pub individual: usize,
    /// Row `j` holds the averaged inclusion probabilities of the regression
    /// of `x_j` on the others; `NaN` where that regression failed.
    pub raw: DMatrix<f64>,
    /// Symmetrized probabilities, zero diagonal.
    pub prob: DMatrix<f64>,
    pub adjacency: DMatrix<u8>,
    pub hyper_provenance: Vec<ResponseProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFailure {
    pub anchor: usize,
    pub response: usize,
    pub message: String,
}

/// Graphs for the requested anchors plus any failed regressions.
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub graphs: Vec<GraphEstimate>,
    pub failures: Vec<RegressionFailure>,
}

/// `(A + Aᵀ)/2` with zero diagonal. Off-diagonal entries must lie in `[0, 1]`;
/// `NaN` marks a missing entry and propagates.
pub fn symmetrize(alpha_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = alpha_hat.nrows();
    if alpha_hat.ncols() != p {
        return Err(WplError::DimensionMismatch("inclusion matrix is not square".into()));
    }
    for j in 0..p {
        for k in 0..p {
            let v = alpha_hat[(j, k)];
            if j != k && !v.is_nan() && !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("inclusion probability {v} at ({j}, {k})")));
            }
        }
    }
    Ok(DMatrix::from_fn(p, p, |j, k| {
        if j == k {
            0.0
        } else {
            (alpha_hat[(j, k)] + alpha_hat[(k, j)]) / 2.0
        }
    }))
}

/// Edge `(j, k)` is present iff `prob_jk > t`. Missing (`NaN`) entries give no edge.
pub fn threshold_graph(prob: &DMatrix<f64>, t: f64) -> DMatrix<u8> {
    DMatrix::from_fn(prob.nrows(), prob.ncols(), |j, k| {
        u8::from(j != k && prob[(j, k)] > t)
    })
}

/// `Xᵀ diag(w) X` and `Σ w`.
fn weighted_gram(data: &DMatrix<f64>, weights: &[f64]) -> (DMatrix<f64>, f64) {
    let p = data.ncols();
    let mut gram = DMatrix::zeros(p, p);
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for a in 0..p {
            let wa = w * data[(i, a)];
            if wa == 0.0 {
                continue;
            }
            for b in a..p {
                gram[(a, b)] += wa * data[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    (gram, weights.iter().sum())
}

/// Weighted Gram matrices of the distinct weight rows among the anchors.
struct AnchorGrams {
    anchors: Vec<usize>,
    grams: Vec<(DMatrix<f64>, f64)>,
    /// `anchor_gram[i]` indexes `grams` for `anchors[i]`.
    anchor_gram: Vec<usize>,
}

impl AnchorGrams {
    fn build(request: &FitRequest) -> Result<Self> {
        let anchors = request.anchor_list();
        let data = request.fitted_data();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut rows = Vec::new();
        let mut anchor_gram = Vec::with_capacity(anchors.len());
        for &l in &anchors {
            let row = request.weight_row(l);
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(invalid(format!("weight row {l} has invalid entries")));
            }
            if !row.iter().any(|w| *w > 0.0) {
                return Err(invalid(format!("weight row {l} is all zero")));
            }
            let key: Vec<u64> = row.iter().map(|w| w.to_bits()).collect();
            let next = rows.len();
            let idx = *seen.entry(key).or_insert_with(|| {
                rows.push(row);
                next
            });
            anchor_gram.push(idx);
        }
        let grams = rows
            .par_iter()
            .map(|w| weighted_gram(&data, w))
            .collect();
        Ok(Self {
            anchors,
            grams,
            anchor_gram,
        })
    }

    fn anchor_set(&self, j: usize) -> AnchorSet {
        AnchorSet {
            stats: self
                .grams
                .iter()
                .map(|(g, mass)| SufficientStats::from_full_gram(g, *mass, j))
                .collect(),
            anchor_stats: self.anchor_gram.clone(),
        }
    }
}

/// Averaged fits for response `j`, one per distinct weight row.
fn fit_response(request: &FitRequest, grams: &AnchorGrams, j: usize) -> Result<Vec<AveragedFit>> {
    let grid = request.grid.resolve(request.p())?;
    let anchors = grams.anchor_set(j);
    let (fits, _) = average_over_pi(&anchors, &grid, request.strategy(), &request.controls)?;
    Ok(fits)
}

/// Fits the regression of variable `j` for anchor `l`. Hyperparameters are
/// selected jointly over all anchors of the request, so `l` must be one of
/// them.
pub fn fit_one_regression(l: usize, j: usize, request: &FitRequest) -> Result<AveragedFit> {
    request.validate()?;
    if j >= request.p() {
        return Err(invalid(format!("response {j} out of range")));
    }
    let grams = AnchorGrams::build(request)?;
    let pos = grams
        .anchors
        .iter()
        .position(|&a| a == l)
        .ok_or_else(|| invalid(format!("anchor {l} is not part of the request")))?;
    let mut fits = fit_response(request, &grams, j).map_err(|e| WplError::Regression {
        anchor: l,
        response: j,
        source: Box::new(e),
    })?;
    Ok(fits.swap_remove(grams.anchor_gram[pos]))
}

/// Estimates a graph for every requested anchor. Failed regressions are
/// reported in [`EstimateOutput::failures`] and leave `NaN` in the affected
/// rows and columns of `raw` and `prob`.
pub fn estimate_all(request: &FitRequest) -> Result<EstimateOutput> {
    request.validate()?;
    let p = request.p();
    let grams = AnchorGrams::build(request)?;
    let per_response: Vec<Result<Vec<AveragedFit>>> = (0..p)
        .into_par_iter()
        .map(|j| fit_response(request, &grams, j))
        .collect();

    let mut failures = Vec::new();
    for (j, r) in per_response.iter().enumerate() {
        if let Err(e) = r {
            for &l in &grams.anchors {
                failures.push(RegressionFailure {
                    anchor: l,
                    response: j,
                    message: e.to_string(),
                });
            }
        }
    }

    let graphs = grams
        .anchors
        .iter()
        .enumerate()
        .map(|(pos, &l)| {
            let u = grams.anchor_gram[pos];
            let mut raw = DMatrix::zeros(p, p);
            let mut provenance = Vec::new();
            for (j, r) in per_response.iter().enumerate() {
                match r {
                    Ok(fits) => {
                        let fit = &fits[u];
                        for (c, k) in (0..p).filter(|&k| k != j).enumerate() {
                            raw[(j, k)] = fit.alpha_bar[c];
                        }
                        provenance.push(ResponseProvenance::from_fit(j, fit));
                    }
                    Err(_) => {
                        for k in (0..p).filter(|&k| k != j) {
                            raw[(j, k)] = f64::NAN;
                        }
                    }
                }
            }
            let prob = symmetrize(&raw)?;
            let adjacency = threshold_graph(&prob, request.threshold);
            Ok(GraphEstimate {
                individual: l,
                raw,
                prob,
                adjacency,
                hyper_provenance: provenance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateOutput { graphs, failures })
}
