//! Synthetic settings with known per-individual graphs, and the metrics used
//! to score estimates against them.
//!
//! Variables are 0-indexed here: the "first three" variables whose edges
//! depend on the covariate are 0, 1 and 2. The ambient dimension (number of
//! sampled variables) is always an explicit parameter and the truth matrices
//! match it.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::DataSet;
use crate::error::{invalid, Result, WplError};
use crate::kernel_weights::CovariateMatrix;

/// Generator stream for `seed`. Distinct streams of one seed are independent.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of trial `trial` in a study with root seed `root`.
pub fn trial_seed(root: u64, trial: u64) -> u64 {
    rng_for(root, trial.wrapping_add(1 << 32)).next_u64()
}

/// Per-individual precision matrices and their supports.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionSpec {
    pub omega: Vec<DMatrix<f64>>,
    pub truth: Vec<DMatrix<u8>>,
}

impl PrecisionSpec {
    /// Checks each Ω for symmetry and positive definiteness and derives the
    /// truth graphs from the off-diagonal support.
    pub fn from_omegas(omega: Vec<DMatrix<f64>>) -> Result<Self> {
        for (i, o) in omega.iter().enumerate() {
            if !o.is_square() || o != &o.transpose() {
                return Err(invalid(format!("precision matrix {i} is not symmetric")));
            }
            let eig = o.clone().symmetric_eigenvalues();
            if eig.min() <= 0.0 {
                return Err(WplError::NotPositiveDefinite(format!(
                    "precision matrix {i} has eigenvalue {}",
                    eig.min()
                )));
            }
        }
        let truth = omega.iter().map(support).collect();
        Ok(Self { omega, truth })
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }
}

/// Off-diagonal support of a matrix.
pub fn support(omega: &DMatrix<f64>) -> DMatrix<u8> {
    DMatrix::from_fn(omega.nrows(), omega.ncols(), |j, k| {
        u8::from(j != k && omega[(j, k)] != 0.0)
    })
}

/// A generated dataset, its truth, and the rows replaced by contamination.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub data: DataSet,
    pub spec: PrecisionSpec,
    pub contaminated_rows: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscreteKind {
    /// Both levels share the leading block.
    Independent,
    /// Level 2 moves the block to the trailing variables.
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Noise {
    Gaussian,
    /// Multivariate t with the same scale matrix.
    T { df: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Contamination {
    pub fraction: f64,
    /// Mean shift applied to every coordinate of the contaminating draws.
    #[serde(default = "default_shift")]
    pub shift: f64,
}

fn default_shift() -> f64 {
    3.0
}

/// A fully specified synthetic setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimSetting {
    UniContinuous {
        per_cluster: usize,
        dim: usize,
    },
    MultiContinuous {
        per_cell: usize,
        dim: usize,
    },
    DiscreteIndependent {
        c: f64,
        n1: usize,
        n2: usize,
        dim: usize,
    },
    DiscreteDependent {
        c: f64,
        n1: usize,
        n2: usize,
        dim: usize,
    },
    /// Homogeneous data for covariate-free fitting: the independent discrete
    /// setting.
    CovariateFree {
        c: f64,
        n1: usize,
        n2: usize,
        dim: usize,
    },
    /// The dependent discrete setting in a large ambient dimension.
    HighDim {
        c: f64,
        n1: usize,
        n2: usize,
        dim: usize,
    },
    Contaminated {
        base: Box<SimSetting>,
        fraction: f64,
        #[serde(default = "default_shift")]
        shift: f64,
    },
    TNoise {
        base: Box<SimSetting>,
        df: f64,
    },
}

impl SimSetting {
    pub const KINDS: [&'static str; 8] = [
        "uni-continuous",
        "multi-continuous",
        "discrete-independent",
        "discrete-dependent",
        "covariate-free",
        "high-dim",
        "contaminated",
        "t-noise",
    ];

    /// The setting's defaults at ambient dimension `dim`.
    pub fn preset(kind: &str, dim: usize) -> Result<Self> {
        let base = || SimSetting::DiscreteDependent {
            c: 15.0,
            n1: 50,
            n2: 50,
            dim,
        };
        Ok(match kind {
            "uni-continuous" => SimSetting::UniContinuous { per_cluster: 50, dim },
            "multi-continuous" => SimSetting::MultiContinuous { per_cell: 25, dim },
            "discrete-independent" => SimSetting::DiscreteIndependent {
                c: 15.0,
                n1: 50,
                n2: 50,
                dim,
            },
            "discrete-dependent" => base(),
            "covariate-free" => SimSetting::CovariateFree {
                c: 15.0,
                n1: 50,
                n2: 50,
                dim,
            },
            "high-dim" => SimSetting::HighDim {
                c: 15.0,
                n1: 20,
                n2: 30,
                dim,
            },
            "contaminated" => SimSetting::Contaminated {
                base: Box::new(base()),
                fraction: 0.05,
                shift: default_shift(),
            },
            "t-noise" => SimSetting::TNoise {
                base: Box::new(base()),
                df: 5.0,
            },
            other => {
                return Err(invalid(format!(
                    "unknown setting {other:?}; valid settings: {}",
                    Self::KINDS.join(", ")
                )))
            }
        })
    }

    pub fn generate(&self, seed: u64) -> Result<Simulation> {
        match self {
            SimSetting::UniContinuous { per_cluster, dim } => gen_uni_continuous(*per_cluster, *dim, seed),
            SimSetting::MultiContinuous { per_cell, dim } => gen_multi_continuous(*per_cell, *dim, seed),
            SimSetting::DiscreteIndependent { c, n1, n2, dim }
            | SimSetting::CovariateFree { c, n1, n2, dim } => {
                gen_discrete(DiscreteKind::Independent, *c, *n1, *n2, *dim, seed)
            }
            SimSetting::DiscreteDependent { c, n1, n2, dim } | SimSetting::HighDim { c, n1, n2, dim } => {
                gen_discrete(DiscreteKind::Dependent, *c, *n1, *n2, *dim, seed)
            }
            SimSetting::Contaminated { base, fraction, shift } => gen_robustness(
                base,
                Some(Contamination {
                    fraction: *fraction,
                    shift: *shift,
                }),
                Noise::Gaussian,
                seed,
            ),
            SimSetting::TNoise { base, df } => gen_robustness(base, None, Noise::T { df: *df }, seed),
        }
    }
}

/// Draws `count` rows from `N(0, Ω⁻¹)` using the Cholesky factor of `Ω`.
pub fn sample_mvn_precision<R: Rng + ?Sized>(omega: &DMatrix<f64>, count: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let factor = precision_factor(omega)?;
    let mut out = DMatrix::zeros(count, omega.nrows());
    for i in 0..count {
        out.set_row(i, &draw_row(&factor, rng).transpose());
    }
    Ok(out)
}

fn precision_factor(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !omega.is_square() || omega.nrows() == 0 {
        return Err(invalid("precision matrix must be square and non-empty"));
    }
    let chol = Cholesky::new(omega.clone())
        .ok_or_else(|| WplError::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(chol.l().transpose())
}

/// Solves `Lᵀ x = ε` for standard normal `ε`, giving covariance `Ω⁻¹`.
fn draw_row<R: Rng + ?Sized>(upper: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let eps = DVector::from_fn(upper.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    upper
        .solve_upper_triangular(&eps)
        .expect("Cholesky factor has a positive diagonal")
}

fn sample_individuals<R: Rng + ?Sized>(spec: &PrecisionSpec, noise: Noise, rng: &mut R) -> Result<DMatrix<f64>> {
    let n = spec.n();
    let p = spec.omega.first().map_or(0, |o| o.nrows());
    let chi = match noise {
        Noise::Gaussian => None,
        Noise::T { df } => {
            if !(df >= 1.0 && df.is_finite()) {
                return Err(invalid(format!("t degrees of freedom must be >= 1, got {df}")));
            }
            Some((df, ChiSquared::new(df).map_err(|e| invalid(e.to_string()))?))
        }
    };
    let mut data = DMatrix::zeros(n, p);
    let mut cached: Option<(&DMatrix<f64>, DMatrix<f64>)> = None;
    for (i, omega) in spec.omega.iter().enumerate() {
        let upper = match &cached {
            Some((o, u)) if *o == omega => u.clone(),
            _ => {
                let u = precision_factor(omega)?;
                cached = Some((omega, u.clone()));
                u
            }
        };
        let mut x = draw_row(&upper, rng);
        if let Some((df, chi)) = &chi {
            let g: f64 = chi.sample(rng);
            x *= (df / g).sqrt();
        }
        data.set_row(i, &x.transpose());
    }
    Ok(data)
}

fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min {
        return Err(invalid(format!("ambient dimension must be at least {min}, got {dim}")));
    }
    Ok(())
}

/// Ω for a continuous setting: diagonal 2, edge (1,2) fixed at 1, edges
/// (0,1) and (0,2) driven by `z01` and `z02`.
fn continuous_omega(dim: usize, z01: f64, z02: f64) -> DMatrix<f64> {
    let mut o = DMatrix::from_diagonal_element(dim, dim, 2.0);
    let e01 = if z01 < 1.0 { (0.5 - 0.5 * z01).min(1.0) } else { 0.0 };
    let e02 = if z02 > -1.0 { (0.5 + 0.5 * z02).min(1.0) } else { 0.0 };
    o[(0, 1)] = e01;
    o[(1, 0)] = e01;
    o[(0, 2)] = e02;
    o[(2, 0)] = e02;
    o[(1, 2)] = 1.0;
    o[(2, 1)] = 1.0;
    o
}

const INTERVALS: [(f64, f64); 3] = [(-3.0, -1.0), (-1.0, 1.0), (1.0, 3.0)];

/// One-dimensional covariate, `per_cluster` draws from each of
/// `[−3,−1]`, `[−1,1]`, `[1,3]` in that order.
pub fn gen_uni_continuous(per_cluster: usize, dim: usize, seed: u64) -> Result<Simulation> {
    check_dim(dim, 3)?;
    if per_cluster == 0 {
        return Err(invalid("per_cluster must be positive"));
    }
    let mut rng = rng_for(seed, 0);
    let z: Vec<f64> = INTERVALS
        .iter()
        .flat_map(|&(a, b)| (0..per_cluster).map(|_| a + (b - a) * rng.random::<f64>()).collect::<Vec<_>>())
        .collect();
    let spec = PrecisionSpec::from_omegas(z.iter().map(|&zi| continuous_omega(dim, zi, zi)).collect())?;
    let data = sample_individuals(&spec, Noise::Gaussian, &mut rng)?;
    Ok(Simulation {
        data: DataSet::new(data, Some(CovariateMatrix::from_column(&z)?))?,
        spec,
        contaminated_rows: Vec::new(),
    })
}

/// Two-dimensional covariate, `per_cell` draws in each cell of the 3×3
/// partition of `[−3,3]²`; cells are visited with the first coordinate
/// outermost. Edge (0,1) follows `z_1`, edge (0,2) follows `z_2`.
pub fn gen_multi_continuous(per_cell: usize, dim: usize, seed: u64) -> Result<Simulation> {
    check_dim(dim, 3)?;
    if per_cell == 0 {
        return Err(invalid("per_cell must be positive"));
    }
    let mut rng = rng_for(seed, 0);
    let mut rows = Vec::with_capacity(9 * per_cell);
    for &(a1, b1) in &INTERVALS {
        for &(a2, b2) in &INTERVALS {
            for _ in 0..per_cell {
                let z1 = a1 + (b1 - a1) * rng.random::<f64>();
                let z2 = a2 + (b2 - a2) * rng.random::<f64>();
                rows.push(vec![z1, z2]);
            }
        }
    }
    let spec = PrecisionSpec::from_omegas(rows.iter().map(|z| continuous_omega(dim, z[0], z[1])).collect())?;
    let data = sample_individuals(&spec, Noise::Gaussian, &mut rng)?;
    Ok(Simulation {
        data: DataSet::new(data, Some(CovariateMatrix::from_rows(&rows)?))?,
        spec,
        contaminated_rows: Vec::new(),
    })
}

/// `λλᵀ + 10·I` with `λ` equal to `c` on four consecutive variables.
fn block_omega(dim: usize, c: f64, trailing: bool) -> DMatrix<f64> {
    let start = if trailing { dim - 4 } else { 0 };
    let lambda = DVector::from_fn(dim, |j, _| if (start..start + 4).contains(&j) { c } else { 0.0 });
    &lambda * lambda.transpose() + DMatrix::from_diagonal_element(dim, dim, 10.0)
}

/// Two-level covariate: individuals `0..n1` have `z = 1`, the rest `z = 2`.
pub fn gen_discrete(kind: DiscreteKind, c: f64, n1: usize, n2: usize, dim: usize, seed: u64) -> Result<Simulation> {
    check_dim(dim, 4)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(invalid(format!("signal c must be finite and non-negative, got {c}")));
    }
    if n1 + n2 == 0 {
        return Err(invalid("need at least one individual"));
    }
    let level1 = block_omega(dim, c, false);
    let level2 = block_omega(dim, c, kind == DiscreteKind::Dependent);
    let omega = (0..n1 + n2)
        .map(|i| if i < n1 { level1.clone() } else { level2.clone() })
        .collect();
    let spec = PrecisionSpec::from_omegas(omega)?;
    let z: Vec<f64> = (0..n1 + n2).map(|i| if i < n1 { 1.0 } else { 2.0 }).collect();
    let mut rng = rng_for(seed, 0);
    let data = sample_individuals(&spec, Noise::Gaussian, &mut rng)?;
    Ok(Simulation {
        data: DataSet::new(data, Some(CovariateMatrix::from_column(&z)?))?,
        spec,
        contaminated_rows: Vec::new(),
    })
}

/// Regenerates `base` under heavy-tailed noise and/or replaces a fraction of
/// rows with draws from `N(shift·1, I)`. Contamination uses its own stream,
/// so a zero fraction reproduces the base data exactly.
pub fn gen_robustness(
    base: &SimSetting,
    contamination: Option<Contamination>,
    noise: Noise,
    seed: u64,
) -> Result<Simulation> {
    let mut sim = base.generate(seed)?;
    if let Noise::T { .. } = noise {
        let mut rng = rng_for(seed, 2);
        let data = sample_individuals(&sim.spec, noise, &mut rng)?;
        sim.data = DataSet::new(data, sim.data.covariates().cloned())?;
    }
    if let Some(cont) = contamination {
        if !(0.0..=0.5).contains(&cont.fraction) {
            return Err(invalid(format!("contamination fraction must lie in [0, 0.5], got {}", cont.fraction)));
        }
        if !cont.shift.is_finite() {
            return Err(invalid("contamination shift must be finite"));
        }
        let n = sim.data.n();
        let count = (cont.fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
        let mut rng = rng_for(seed, 1);
        let mut rows = rand::seq::index::sample(&mut rng, n, count).into_vec();
        rows.sort_unstable();
        let mut data = sim.data.data().clone();
        for &i in &rows {
            for j in 0..data.ncols() {
                data[(i, j)] = cont.shift + rng.sample::<f64, _>(StandardNormal);
            }
        }
        sim.data = DataSet::new(data, sim.data.covariates().cloned())?;
        sim.contaminated_rows = rows;
    }
    Ok(sim)
}

/// Sensitivity and specificity over ordered off-diagonal pairs; `None` when
/// the truth has no positives (negatives).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensSpec {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

pub fn sensitivity_specificity(truth: &DMatrix<u8>, estimate: &DMatrix<u8>) -> Result<SensSpec> {
    if truth.shape() != estimate.shape() || !truth.is_square() {
        return Err(WplError::DimensionMismatch(format!(
            "truth is {:?}, estimate is {:?}",
            truth.shape(),
            estimate.shape()
        )));
    }
    let (mut tp, mut pos, mut tn, mut neg) = (0u64, 0u64, 0u64, 0u64);
    for j in 0..truth.nrows() {
        for k in 0..truth.ncols() {
            if j == k {
                continue;
            }
            let hit = estimate[(j, k)] != 0;
            if truth[(j, k)] != 0 {
                pos += 1;
                tp += u64::from(hit);
            } else {
                neg += 1;
                tn += u64::from(!hit);
            }
        }
    }
    let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
    Ok(SensSpec {
        sensitivity: ratio(tp, pos),
        specificity: ratio(tn, neg),
    })
}

/// Fraction of (negative, positive) pairs whose scores are strictly ordered
/// correctly. Ties count as incorrect.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(WplError::DimensionMismatch(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("scores contain NaN"));
    }
    let mut neg: Vec<f64> = labels.iter().zip(scores).filter(|(l, _)| **l == 0).map(|(_, s)| *s).collect();
    let pos: Vec<f64> = labels.iter().zip(scores).filter(|(l, _)| **l != 0).map(|(_, s)| *s).collect();
    if neg.is_empty() || pos.is_empty() {
        return Err(WplError::UndefinedMetric("AUC needs both positive and negative labels".into()));
    }
    neg.sort_by(f64::total_cmp);
    let correct: u64 = pos.iter().map(|&s| neg.partition_point(|&v| v < s) as u64).sum();
    Ok(correct as f64 / (neg.len() as u64 * pos.len() as u64) as f64)
}

/// Labels and scores over the strict upper triangle.
pub fn edge_scores(truth: &DMatrix<u8>, prob: &DMatrix<f64>) -> Result<(Vec<u8>, Vec<f64>)> {
    if truth.shape() != prob.shape() || !truth.is_square() {
        return Err(WplError::DimensionMismatch("truth and probabilities differ in shape".into()));
    }
    let p = truth.nrows();
    let mut labels = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    let mut scores = Vec::with_capacity(labels.capacity());
    for j in 0..p {
        for k in j + 1..p {
            labels.push(u8::from(truth[(j, k)] != 0));
            scores.push(prob[(j, k)]);
        }
    }
    Ok((labels, scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualMetrics {
    pub individual: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
}

/// Per-individual metrics and their means over individuals where defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
    pub per_individual: Vec<IndividualMetrics>,
}

impl MetricReport {
    pub fn from_individuals(per_individual: Vec<IndividualMetrics>) -> Self {
        Self {
            sensitivity: mean_defined(per_individual.iter().map(|m| m.sensitivity)),
            specificity: mean_defined(per_individual.iter().map(|m| m.specificity)),
            auc: mean_defined(per_individual.iter().map(|m| m.auc)),
            per_individual,
        }
    }
}

pub fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Scores one individual. AUC is `None` when the truth is single-class or
/// the probabilities are missing.
pub fn evaluate_individual(
    individual: usize,
    truth: &DMatrix<u8>,
    adjacency: &DMatrix<u8>,
    prob: Option<&DMatrix<f64>>,
) -> Result<IndividualMetrics> {
    let ss = sensitivity_specificity(truth, adjacency)?;
    let auc = match prob {
        Some(prob) => {
            let (labels, scores) = edge_scores(truth, prob)?;
            match auc(&labels, &scores) {
                Ok(a) => Some(a),
                Err(WplError::UndefinedMetric(_)) | Err(WplError::InvalidArgument(_)) => None,
                Err(e) => return Err(e),
            }
        }
        None => None,
    };
    Ok(IndividualMetrics {
        individual,
        sensitivity: ss.sensitivity,
        specificity: ss.specificity,
        auc,
    })
}

/// Greedy nearest-neighbour ordering starting at the first individual. Ties
/// go to the lowest index.
pub fn greedy_sort_covariates(covariates: &CovariateMatrix) -> Vec<usize> {
    let n = covariates.n();
    let z = covariates.values();
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut current = 0;
    used[0] = true;
    order.push(0);
    for _ in 1..n {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (i, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let d = (z.row(i) - z.row(current)).norm_squared();
            if best.is_none() || d < best_d {
                best = Some(i);
                best_d = d;
            }
        }
        current = best.expect("an unsorted point remains");
        used[current] = true;
        order.push(current);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(truth: &DMatrix<u8>) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for j in 0..truth.nrows() {
            for k in j + 1..truth.ncols() {
                if truth[(j, k)] == 1 {
                    e.push((j, k));
                }
            }
        }
        e
    }

    #[test]
    fn uni_truths_by_cluster() {
        assert_eq!(edges(&support(&continuous_omega(5, -2.0, -2.0))), vec![(0, 1), (1, 2)]);
        assert_eq!(edges(&support(&continuous_omega(5, 0.0, 0.0))), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(edges(&support(&continuous_omega(5, 2.0, 2.0))), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn multi_truths_by_cell() {
        // C7: z1 in (1,3), z2 in (-3,-1)
        assert_eq!(edges(&support(&continuous_omega(4, 2.0, -2.0))), vec![(1, 2)]);
        assert_eq!(edges(&support(&continuous_omega(4, 0.0, 0.0))), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(edges(&support(&continuous_omega(4, -2.0, -2.0))), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn discrete_blocks() {
        let lead = support(&block_omega(10, 15.0, false));
        let tail = support(&block_omega(10, 15.0, true));
        for j in 0..10 {
            for k in 0..10 {
                let in_lead = j < 4 && k < 4 && j != k;
                let in_tail = j >= 6 && k >= 6 && j != k;
                assert_eq!(lead[(j, k)], u8::from(in_lead));
                assert_eq!(tail[(j, k)], u8::from(in_tail));
            }
        }
        assert_eq!(support(&block_omega(10, 0.0, false)), DMatrix::zeros(10, 10));
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = gen_uni_continuous(5, 4, 7).unwrap();
        let b = gen_uni_continuous(5, 4, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_uni_continuous(5, 4, 8).unwrap();
        assert_ne!(a.data, c.data);
        let z = a.data.covariates().unwrap().column(0);
        assert!(z[..5].iter().all(|v| (-3.0..-1.0).contains(v)));
        assert!(z[10..].iter().all(|v| (1.0..3.0).contains(v)));
    }

    #[test]
    fn non_pd_rejected() {
        let o = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            PrecisionSpec::from_omegas(vec![o.clone()]),
            Err(WplError::NotPositiveDefinite(_))
        ));
        assert!(sample_mvn_precision(&o, 3, &mut rng_for(0, 0)).is_err());
    }

    #[test]
    fn metric_examples() {
        let t = DMatrix::from_row_slice(3, 3, &[0, 1, 0, 1, 0, 1, 0, 1, 0]);
        let same = sensitivity_specificity(&t, &t).unwrap();
        assert_eq!((same.sensitivity, same.specificity), (Some(1.0), Some(1.0)));
        let comp = DMatrix::from_fn(3, 3, |j, k| u8::from(j != k && t[(j, k)] == 0));
        let c = sensitivity_specificity(&t, &comp).unwrap();
        assert_eq!((c.sensitivity, c.specificity), (Some(0.0), Some(0.0)));
        let empty = sensitivity_specificity(&DMatrix::zeros(3, 3), &t).unwrap();
        assert_eq!(empty.sensitivity, None);
        assert!(sensitivity_specificity(&t, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn six_edge_example() {
        let mut truth = DMatrix::zeros(10, 10);
        let true_edges = [(0, 1), (0, 2), (1, 2), (3, 4), (5, 6), (7, 8)];
        for &(j, k) in &true_edges {
            truth[(j, k)] = 1;
            truth[(k, j)] = 1;
        }
        let mut est = truth.clone();
        est[(7, 8)] = 0;
        est[(8, 7)] = 0;
        est[(0, 9)] = 1;
        est[(9, 0)] = 1;
        let r = sensitivity_specificity(&truth, &est).unwrap();
        assert_eq!(r.sensitivity, Some(10.0 / 12.0));
        assert_eq!(r.specificity, Some(76.0 / 78.0));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0, 1, 0, 1], &[0.1, 0.9, 0.2, 0.8]).unwrap(), 1.0);
        assert_eq!(auc(&[0, 1, 0, 1], &[0.5; 4]).unwrap(), 0.0);
        assert_eq!(auc(&[0, 1, 0, 1], &[0.1, 0.9, 0.8, 0.7]).unwrap(), 0.75);
        assert!(matches!(auc(&[1, 1], &[0.1, 0.2]), Err(WplError::UndefinedMetric(_))));
    }

    #[test]
    fn greedy_sort_examples() {
        let z = CovariateMatrix::from_column(&[0.0, 10.0, 1.0, 2.0]).unwrap();
        assert_eq!(greedy_sort_covariates(&z), vec![0, 2, 3, 1]);
        let z = CovariateMatrix::from_column(&[5.0]).unwrap();
        assert_eq!(greedy_sort_covariates(&z), vec![0]);
        let z = CovariateMatrix::from_column(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(greedy_sort_covariates(&z), vec![0, 1, 2, 3]);
        // equidistant neighbours: lowest index wins
        let z = CovariateMatrix::from_column(&[0.0, 1.0, -1.0]).unwrap();
        assert_eq!(greedy_sort_covariates(&z), vec![0, 1, 2]);
    }

    #[test]
    fn presets_and_unknown_kind() {
        for kind in SimSetting::KINDS {
            assert!(SimSetting::preset(kind, 6).is_ok(), "{kind}");
        }
        let err = SimSetting::preset("foo", 6).unwrap_err().to_string();
        assert!(err.contains("uni-continuous"));
    }
}
