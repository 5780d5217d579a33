//! Run configurations and manifests.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wpl::graph::{RegressionFailure, ResponseProvenance};
use wpl::hyperparam::GridSpec;
use wpl::simulation::SimSetting;
use wpl::vi::FitControls;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: PathBuf,
    pub covariates: Option<PathBuf>,
    pub out: PathBuf,
    pub threshold: f64,
    /// Fixed kernel bandwidth; adaptive bandwidths when absent.
    pub tau: Option<f64>,
    pub covariate_free: bool,
    pub high_dim: bool,
    pub grid: GridSpec,
    /// 0-based individuals to estimate; all when absent.
    pub anchors: Option<Vec<usize>>,
    pub max_sweeps: usize,
    pub tol: f64,
    pub standardize: bool,
    /// Worker threads; available parallelism when absent.
    pub threads: Option<usize>,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(data: PathBuf, covariates: Option<PathBuf>, out: PathBuf) -> Self {
        let controls = FitControls::default();
        Self {
            data,
            covariates,
            out,
            threshold: 0.5,
            tau: None,
            covariate_free: false,
            high_dim: false,
            grid: GridSpec::default(),
            anchors: None,
            max_sweeps: controls.max_sweeps,
            tol: controls.tol,
            standardize: true,
            threads: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(CliError::Usage(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Usage(format!("tol must be positive, got {}", self.tol)));
        }
        if self.tau.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(CliError::Usage("tau must be positive".into()));
        }
        if self.covariate_free && self.tau.is_some() {
            return Err(CliError::Usage("--tau and --covariate-free are mutually exclusive".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn controls(&self) -> FitControls {
        FitControls {
            max_sweeps: self.max_sweeps,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub setting: SimSetting,
    pub trials: u64,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Directory written by `simulate`.
    pub truth: PathBuf,
    /// Directory of `fit` outputs; with several trials, one `trial_<t>`
    /// subdirectory per trial.
    pub estimates: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RunConfig {
    Fit(FitConfig),
    Simulate(SimulateConfig),
    Eval(EvalConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub individual: usize,
    pub responses: Vec<ResponseProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    #[serde(default)]
    pub anchors: Vec<AnchorRecord>,
    #[serde(default)]
    pub failures: Vec<RegressionFailure>,
    /// Per-trial seeds of a simulation.
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub timings: Timings,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
