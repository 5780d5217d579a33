//! Hyperparameter selection for the weighted regressions.
//!
//! For every prior inclusion probability `π` on the grid, one `(σ², σ_β²)`
//! cell is chosen globally for a response variable by maximizing the summed
//! ELBO over all anchors. The per-`π` fits of each anchor are then averaged
//! with softmax weights of their ELBOs.
//!
//! In the high-dimensional variant `σ²` is not gridded; every fit estimates
//! it by empirical Bayes inside the coordinate-ascent loop.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, WplError};
use crate::vi::{
    self, alpha_batch_from_stats, elbo_from_stats, expected_wrss, mu_batch_from_stats,
    s2_from_stats, FitControls, HyperChoice, RegressionProblem, SufficientStats,
    VariationalState,
};

/// Candidate hyperparameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub pi: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub sigma2_beta: Vec<f64>,
}

impl HyperGrid {
    pub fn new(pi: Vec<f64>, sigma2: Vec<f64>, sigma2_beta: Vec<f64>) -> Result<Self> {
        let g = Self {
            pi,
            sigma2,
            sigma2_beta,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pi.is_empty() || self.sigma2.is_empty() || self.sigma2_beta.is_empty() {
            return Err(invalid("every hyperparameter grid must be non-empty"));
        }
        if self.pi.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(invalid("pi candidates must lie in (0, 1)"));
        }
        if self
            .sigma2
            .iter()
            .chain(&self.sigma2_beta)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(invalid("variance candidates must be positive and finite"));
        }
        Ok(())
    }
}

const DEFAULT_PI_POINTS: usize = 6;
const DEFAULT_SIGMA2_MULTIPLIERS: [f64; 11] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2];
const DEFAULT_SIGMA2_BETA: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
const MAX_PI: f64 = 0.5;

/// Geometric grid of `points` inclusion probabilities from `1/(2(p-1))` up to 0.5.
pub fn default_pi_grid(p: usize, points: usize) -> Vec<f64> {
    let lo = if p > 1 { (0.5 / (p - 1) as f64).min(MAX_PI) } else { MAX_PI };
    if points <= 1 || lo >= MAX_PI {
        return vec![lo];
    }
    let ratio = (MAX_PI / lo).powf(1.0 / (points - 1) as f64);
    let mut out: Vec<f64> = (0..points).map(|i| lo * ratio.powi(i as i32)).collect();
    out[points - 1] = MAX_PI;
    out
}

/// The default grid for a `p`-variable model. `σ²` entries are multipliers
/// for [`Sigma2Strategy::AnchorRelative`].
pub fn default_grid(p: usize) -> HyperGrid {
    HyperGrid {
        pi: default_pi_grid(p, DEFAULT_PI_POINTS),
        sigma2: DEFAULT_SIGMA2_MULTIPLIERS.to_vec(),
        sigma2_beta: DEFAULT_SIGMA2_BETA.to_vec(),
    }
}

/// Configurable grid recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Explicit `π` candidates; when absent a geometric grid is used.
    pub pi: Option<Vec<f64>>,
    pub pi_points: usize,
    /// `σ²` candidates as multiples of each anchor's weighted response energy.
    pub sigma2_multipliers: Vec<f64>,
    /// Absolute `σ²` candidates shared by all anchors; overrides the
    /// multipliers when present.
    pub sigma2: Option<Vec<f64>>,
    pub sigma2_beta: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            pi: None,
            pi_points: DEFAULT_PI_POINTS,
            sigma2_multipliers: DEFAULT_SIGMA2_MULTIPLIERS.to_vec(),
            sigma2: None,
            sigma2_beta: DEFAULT_SIGMA2_BETA.to_vec(),
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, p: usize) -> Result<HyperGrid> {
        let grid = HyperGrid {
            pi: self
                .pi
                .clone()
                .unwrap_or_else(|| default_pi_grid(p, self.pi_points.max(1))),
            sigma2: self
                .sigma2
                .clone()
                .unwrap_or_else(|| self.sigma2_multipliers.clone()),
            sigma2_beta: self.sigma2_beta.clone(),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// How the resolved `σ²` values are interpreted when `σ²` is gridded.
    pub fn sigma2_strategy(&self) -> Sigma2Strategy {
        if self.sigma2.is_some() {
            Sigma2Strategy::Grid
        } else {
            Sigma2Strategy::AnchorRelative
        }
    }
}

/// One fitted member of a model average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub hyper: HyperChoice,
    pub state: VariationalState,
}

/// Softmax-weighted average of per-`π` fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedFit {
    pub alpha_bar: Vec<f64>,
    pub mu_bar: Vec<f64>,
    pub member_elbos: Vec<f64>,
    pub weights: Vec<f64>,
    pub members: Vec<Member>,
}

/// Softmax weights `∝ exp(elbo_r - max elbo)`.
pub fn softmax_weights(elbos: &[f64]) -> Result<Vec<f64>> {
    if elbos.is_empty() {
        return Err(invalid("softmax over an empty list"));
    }
    if elbos.iter().any(|e| !e.is_finite()) {
        return Err(invalid("softmax over non-finite ELBOs"));
    }
    let max = elbos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = elbos.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// Averages `α` and `μ` across members with softmax weights over their ELBOs.
pub fn softmax_average(members: Vec<Member>) -> Result<AveragedFit> {
    let elbos: Vec<f64> = members.iter().map(|m| m.state.elbo).collect();
    let weights = softmax_weights(&elbos)?;
    let k = members[0].state.alpha.len();
    if members.iter().any(|m| m.state.alpha.len() != k) {
        return Err(WplError::DimensionMismatch(
            "members have different numbers of predictors".into(),
        ));
    }
    let mut alpha_bar = vec![0.0; k];
    let mut mu_bar = vec![0.0; k];
    for (m, w) in members.iter().zip(&weights) {
        for c in 0..k {
            alpha_bar[c] += w * m.state.alpha[c];
            mu_bar[c] += w * m.state.mu[c];
        }
    }
    Ok(AveragedFit {
        alpha_bar,
        mu_bar,
        member_elbos: elbos,
        weights,
        members,
    })
}

/// Regressions for one response that differ only in their anchor weights.
///
/// Anchors with identical weight rows share one entry of `stats`;
/// `anchor_stats[l]` indexes the entry used by anchor `l`.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    pub stats: Vec<SufficientStats>,
    pub anchor_stats: Vec<usize>,
}

impl AnchorSet {
    pub fn from_problems(problems: &[RegressionProblem]) -> Self {
        Self {
            stats: problems.iter().map(RegressionProblem::stats).collect(),
            anchor_stats: (0..problems.len()).collect(),
        }
    }
}

/// How `σ²` is handled during the grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Strategy {
    /// Grid values are used as given for every anchor.
    Grid,
    /// Grid values multiply each anchor's weighted response energy
    /// `yᵀWy / Σw`, so one global choice adapts to local response scale.
    AnchorRelative,
    EmpiricalBayes,
}

/// Scale of anchor-relative `σ²` candidates; 1 for an all-zero response.
pub fn anchor_sigma2_scale(stats: &SufficientStats) -> f64 {
    let e = stats.response_energy();
    if e.is_finite() && e > 0.0 {
        e
    } else {
        1.0
    }
}

/// The winning grid cell for one `π`, with the fit of every distinct anchor.
#[derive(Debug, Clone)]
pub struct CellSelection {
    pub pi: f64,
    /// Grid `σ²` (a multiplier under [`Sigma2Strategy::AnchorRelative`]);
    /// `NaN` under empirical Bayes.
    pub sigma2: f64,
    pub sigma2_beta: f64,
    pub total_elbo: f64,
    /// Indexed like [`AnchorSet::stats`].
    pub fits: Vec<Member>,
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn fit_cell(
    anchors: &AnchorSet,
    hyper: HyperChoice,
    strategy: Sigma2Strategy,
    controls: &FitControls,
) -> Result<(f64, Vec<Member>)> {
    let fits = anchors
        .stats
        .iter()
        .map(|s| match strategy {
            Sigma2Strategy::Grid => vi::fit_stats(s, &hyper, controls).map(|state| Member { hyper, state }),
            Sigma2Strategy::AnchorRelative => {
                let hyper = HyperChoice {
                    sigma2: hyper.sigma2 * anchor_sigma2_scale(s),
                    ..hyper
                };
                vi::fit_stats(s, &hyper, controls).map(|state| Member { hyper, state })
            }
            Sigma2Strategy::EmpiricalBayes => {
                eb_fit_stats(s, hyper.pi, hyper.sigma2_beta, controls).map(|eb| Member {
                    hyper: HyperChoice {
                        sigma2: eb.sigma2,
                        ..hyper
                    },
                    state: eb.state,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let total = anchors
        .anchor_stats
        .iter()
        .map(|&u| fits[u].state.elbo)
        .sum();
    Ok((total, fits))
}

/// Picks the `(σ², σ_β²)` cell maximizing the ELBO summed over all anchors.
/// Ties go to the smallest `σ²`, then the smallest `σ_β²`. Cells with any
/// failed fit are skipped.
pub fn select_cell(
    anchors: &AnchorSet,
    grid: &HyperGrid,
    pi: f64,
    strategy: Sigma2Strategy,
    controls: &FitControls,
) -> Result<CellSelection> {
    grid.validate()?;
    if anchors.anchor_stats.is_empty() {
        return Err(invalid("no anchors to select hyperparameters for"));
    }
    let sigma2s = match strategy {
        Sigma2Strategy::Grid | Sigma2Strategy::AnchorRelative => sorted_unique(&grid.sigma2),
        Sigma2Strategy::EmpiricalBayes => vec![f64::NAN],
    };
    let mut best: Option<CellSelection> = None;
    let mut last_err = None;
    for &sigma2 in &sigma2s {
        for &sigma2_beta in &sorted_unique(&grid.sigma2_beta) {
            let hyper = HyperChoice {
                pi,
                sigma2: if sigma2.is_nan() { 1.0 } else { sigma2 },
                sigma2_beta,
            };
            hyper.validate()?;
            match fit_cell(anchors, hyper, strategy, controls) {
                Ok((total, fits)) if total.is_finite() => {
                    if best.as_ref().map_or(true, |b| total > b.total_elbo) {
                        best = Some(CellSelection {
                            pi,
                            sigma2,
                            sigma2_beta,
                            total_elbo: total,
                            fits,
                        });
                    }
                }
                Ok(_) => last_err = Some("summed ELBO is not finite".to_string()),
                Err(e) => last_err = Some(e.to_string()),
            }
        }
    }
    best.ok_or_else(|| {
        WplError::SelectionFailure(format!(
            "every grid cell failed for pi = {pi}: {}",
            last_err.unwrap_or_default()
        ))
    })
}

/// Global `(σ², σ_β²)` for a fixed `π` over regressions sharing data and
/// differing only in weights.
pub fn grid_select(
    problems: &[RegressionProblem],
    grid: &HyperGrid,
    pi: f64,
    controls: &FitControls,
) -> Result<(f64, f64)> {
    let anchors = AnchorSet::from_problems(problems);
    let cell = select_cell(&anchors, grid, pi, Sigma2Strategy::Grid, controls)?;
    Ok((cell.sigma2, cell.sigma2_beta))
}

/// Runs [`select_cell`] for every `π` and softmax-averages each anchor's
/// per-`π` fits. Returns one average per entry of `anchors.stats` and the
/// selected cells.
pub fn average_over_pi(
    anchors: &AnchorSet,
    grid: &HyperGrid,
    strategy: Sigma2Strategy,
    controls: &FitControls,
) -> Result<(Vec<AveragedFit>, Vec<CellSelection>)> {
    let cells = sorted_unique(&grid.pi)
        .into_iter()
        .map(|pi| select_cell(anchors, grid, pi, strategy, controls))
        .collect::<Result<Vec<_>>>()?;
    let averaged = (0..anchors.stats.len())
        .map(|u| softmax_average(cells.iter().map(|c| c.fits[u].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((averaged, cells))
}

/// Result of a fit with empirical-Bayes `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct EbFit {
    pub sigma2: f64,
    pub state: VariationalState,
}

const SIGMA2_FLOOR_FACTOR: f64 = 1e-8;

/// Lower clamp for the `σ²` estimate: `1e-8` times the weighted mean square
/// of the response, or `1e-8` when the response is identically zero.
pub fn sigma2_floor(stats: &SufficientStats) -> f64 {
    let energy = stats.response_energy();
    if energy > 0.0 {
        SIGMA2_FLOOR_FACTOR * energy
    } else {
        SIGMA2_FLOOR_FACTOR
    }
}

/// The `σ²` maximizing the ELBO with `q` held fixed:
/// `(E[wRSS] + Σ α_k (μ_k² + s_k²)/σ_β²) / (Σ w + Σ α_k)`.
fn sigma2_update(stats: &SufficientStats, sigma2_beta: f64, state: &VariationalState) -> f64 {
    let e = expected_wrss(stats, &state.alpha, &state.mu, &state.s2);
    let mut slab = 0.0;
    let mut mass = stats.weight_mass;
    for c in 0..stats.k() {
        slab += state.alpha[c] * (state.mu[c] * state.mu[c] + state.s2[c]);
        mass += state.alpha[c];
    }
    ((e + slab / sigma2_beta) / mass).max(sigma2_floor(stats))
}

/// Coordinate ascent with `σ²` updated in closed form after every sweep.
pub fn eb_fit_stats(
    stats: &SufficientStats,
    pi: f64,
    sigma2_beta: f64,
    controls: &FitControls,
) -> Result<EbFit> {
    controls.validate()?;
    if !(stats.weight_mass > 0.0) {
        return Err(invalid("total weight must be positive"));
    }
    let mut hyper = HyperChoice::new(pi, stats.response_energy().max(sigma2_floor(stats)), sigma2_beta)?;
    let mut state = VariationalState::initial(stats.k(), &hyper, s2_from_stats(stats, &hyper));
    let mut current = elbo_from_stats(stats, &hyper, &state.alpha, &state.mu, &state.s2);
    state.elbo_trace.push(current);
    for sweep in 1..=controls.max_sweeps {
        state.s2 = s2_from_stats(stats, &hyper);
        state.mu = mu_batch_from_stats(stats, &hyper, &state.alpha, &state.mu, &state.s2);
        state.alpha = alpha_batch_from_stats(stats, &hyper, &state.alpha, &state.mu, &state.s2);
        hyper.sigma2 = sigma2_update(stats, sigma2_beta, &state);
        // s² depends on σ²; refresh so the reported state is consistent.
        state.s2 = s2_from_stats(stats, &hyper);
        let next = elbo_from_stats(stats, &hyper, &state.alpha, &state.mu, &state.s2);
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
    Ok(EbFit {
        sigma2: hyper.sigma2,
        state,
    })
}

/// Empirical-Bayes `σ²` for one weighted regression.
pub fn empirical_bayes_sigma2(
    problem: &RegressionProblem,
    pi: f64,
    sigma2_beta: f64,
    controls: &FitControls,
) -> Result<EbFit> {
    eb_fit_stats(&problem.stats(), pi, sigma2_beta, controls)
}
