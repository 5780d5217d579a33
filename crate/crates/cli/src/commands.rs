//! The `fit`, `simulate` and `eval` pipelines.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use wpl::graph::{estimate_all, FitRequest, Mode};
use wpl::kernel_weights::{adaptive_bandwidths, build_weight_plan, Bandwidth, WeightPlan};
use wpl::simulation::{evaluate_individual, mean_defined, trial_seed, IndividualMetrics};

use crate::config::{AnchorRecord, EvalConfig, FitConfig, RunConfig, RunManifest, SimulateConfig, Timings, VERSION};
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, load_dataset, read_adjacency, read_matrix, write_adjacency, write_json, write_matrix};

/// Exit status when some regressions failed but outputs were written.
pub const PARTIAL_FAILURE: i32 = 2;

pub const MANIFEST: &str = "manifest.json";

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Estimates graphs and writes `prob_<l>.csv`, `adj_<l>.csv` and the
/// manifest. Returns the process exit status.
pub fn run_fit(config: &FitConfig) -> Result<i32> {
    let start = Instant::now();
    config.validate()?;
    let dataset = load_dataset(&config.data, config.covariates.as_deref())?;
    let n = dataset.n();
    let covariate_free = config.covariate_free || dataset.covariates().is_none();
    let plan = match (covariate_free, dataset.covariates()) {
        (false, Some(z)) => {
            let bandwidth = match config.tau {
                Some(t) => Bandwidth::Fixed(t),
                None => Bandwidth::PerAnchor(adaptive_bandwidths(z)?),
            };
            build_weight_plan(z, bandwidth)?
        }
        _ => WeightPlan::covariate_free(n),
    };
    let mut request = FitRequest::new(dataset.data().clone(), plan);
    request.anchors = config.anchors.clone();
    request.threshold = config.threshold;
    request.mode = if config.high_dim {
        Mode::HighDimensional
    } else if covariate_free {
        Mode::CovariateFree
    } else {
        Mode::Standard
    };
    request.grid = config.grid.clone();
    request.controls = config.controls();
    request.standardize = config.standardize;
    info!("fitting {n} individuals, {} variables, mode {:?}", dataset.p(), request.mode);

    let output = thread_pool(config.threads)?.install(|| estimate_all(&request))?;

    ensure_dir(&config.out)?;
    for g in &output.graphs {
        write_matrix(&config.out.join(format!("prob_{}.csv", g.individual)), &g.prob)?;
        write_adjacency(&config.out.join(format!("adj_{}.csv", g.individual)), &g.adjacency)?;
    }
    for f in &output.failures {
        warn!("regression of variable {} for individual {} failed: {}", f.response, f.anchor, f.message);
    }
    let manifest = RunManifest {
        config: RunConfig::Fit(config.clone()),
        version: VERSION.to_string(),
        anchors: output
            .graphs
            .iter()
            .map(|g| AnchorRecord {
                individual: g.individual,
                responses: g.hyper_provenance.clone(),
            })
            .collect(),
        failures: output.failures.clone(),
        seeds: Vec::new(),
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    write_json(&config.out.join(MANIFEST), &manifest)?;
    Ok(if output.failures.is_empty() { 0 } else { PARTIAL_FAILURE })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub contaminated_rows: Vec<usize>,
}

pub fn trial_dir(root: &Path, trial: u64) -> PathBuf {
    root.join(format!("trial_{trial}"))
}

/// Writes `trial_<t>/{data.csv, covariates.csv, truth_<i>.csv, trial.json}`
/// for every trial plus a top-level manifest.
pub fn run_simulate(config: &SimulateConfig) -> Result<i32> {
    let start = Instant::now();
    if config.trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    ensure_dir(&config.out)?;
    let mut seeds = Vec::new();
    for t in 0..config.trials {
        let seed = trial_seed(config.seed, t);
        seeds.push(seed);
        let sim = config.setting.generate(seed)?;
        let dir = trial_dir(&config.out, t);
        ensure_dir(&dir)?;
        write_matrix(&dir.join("data.csv"), sim.data.data())?;
        if let Some(z) = sim.data.covariates() {
            write_matrix(&dir.join("covariates.csv"), z.values())?;
        }
        for (i, truth) in sim.spec.truth.iter().enumerate() {
            write_adjacency(&dir.join(format!("truth_{i}.csv")), truth)?;
        }
        write_json(
            &dir.join("trial.json"),
            &TrialRecord {
                trial: t,
                seed,
                contaminated_rows: sim.contaminated_rows,
            },
        )?;
    }
    let manifest = RunManifest {
        config: RunConfig::Simulate(config.clone()),
        version: VERSION.to_string(),
        anchors: Vec::new(),
        failures: Vec::new(),
        seeds,
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    write_json(&config.out.join(MANIFEST), &manifest)?;
    Ok(0)
}

/// Numbers `t` of the `trial_<t>` subdirectories, ascending.
fn trials_in(dir: &Path) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        if let Some(t) = entry
            .file_name()
            .to_str()
            .and_then(|s| s.strip_prefix("trial_"))
            .and_then(|s| s.parse().ok())
        {
            if entry.path().is_dir() {
                out.push(t);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Individuals with an `adj_<i>.csv` in `dir`, ascending.
fn estimated_individuals(dir: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        if let Some(i) = entry
            .file_name()
            .to_str()
            .and_then(|s| s.strip_prefix("adj_"))
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse().ok())
        {
            out.push(i);
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"))
}

fn mean_sd(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    let mean = mean_defined(values.iter().copied());
    let sd = (v.len() >= 2).then(|| {
        let m = mean.unwrap_or(0.0);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    });
    (mean, sd)
}

/// Per-trial means over individuals, as scored by [`run_eval`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: u64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
}

/// Scores fit outputs against simulated truths and writes `metrics.csv`:
/// one row per (trial, individual), then `mean` and `sd` rows over the
/// per-trial averages.
pub fn run_eval(config: &EvalConfig) -> Result<i32> {
    let truth_trials = trials_in(&config.truth)?;
    if truth_trials.is_empty() {
        return Err(CliError::Usage(format!(
            "{} contains no trial_<t> directories",
            config.truth.display()
        )));
    }
    let estimate_trials = trials_in(&config.estimates)?;
    let pairs: Vec<(u64, PathBuf)> = if estimate_trials.is_empty() {
        if truth_trials.len() != 1 {
            return Err(CliError::Usage(
                "estimates have no trial_<t> directories but the truth has several trials".into(),
            ));
        }
        vec![(truth_trials[0], config.estimates.clone())]
    } else {
        estimate_trials
            .iter()
            .map(|&t| (t, trial_dir(&config.estimates, t)))
            .collect()
    };

    let mut rows: Vec<(u64, IndividualMetrics)> = Vec::new();
    let mut summaries = Vec::new();
    for (t, est_dir) in pairs {
        let truth_dir = trial_dir(&config.truth, t);
        let individuals = estimated_individuals(&est_dir)?;
        if individuals.is_empty() {
            return Err(CliError::Usage(format!("{} contains no adj_<i>.csv files", est_dir.display())));
        }
        let mut metrics = Vec::new();
        for i in individuals {
            let truth = read_adjacency(&truth_dir.join(format!("truth_{i}.csv")))?;
            let adjacency = read_adjacency(&est_dir.join(format!("adj_{i}.csv")))?;
            let prob_path = est_dir.join(format!("prob_{i}.csv"));
            let prob = if prob_path.exists() {
                Some(read_matrix(&prob_path)?)
            } else {
                None
            };
            metrics.push(evaluate_individual(i, &truth, &adjacency, prob.as_ref())?);
        }
        summaries.push(TrialSummary {
            trial: t,
            sensitivity: mean_defined(metrics.iter().map(|m| m.sensitivity)),
            specificity: mean_defined(metrics.iter().map(|m| m.specificity)),
            auc: mean_defined(metrics.iter().map(|m| m.auc)),
        });
        rows.extend(metrics.into_iter().map(|m| (t, m)));
    }

    ensure_dir(&config.out)?;
    let path = config.out.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Csv {
        path: path.clone(),
        source: e,
    })?;
    let csv_err = |e: csv::Error| CliError::Csv {
        path: path.clone(),
        source: e,
    };
    w.write_record(["trial", "individual", "sensitivity", "specificity", "auc"])
        .map_err(csv_err)?;
    for (t, m) in &rows {
        w.write_record([
            t.to_string(),
            m.individual.to_string(),
            fmt_opt(m.sensitivity),
            fmt_opt(m.specificity),
            fmt_opt(m.auc),
        ])
        .map_err(csv_err)?;
    }
    let (sens_m, sens_sd) = mean_sd(&summaries.iter().map(|s| s.sensitivity).collect::<Vec<_>>());
    let (spec_m, spec_sd) = mean_sd(&summaries.iter().map(|s| s.specificity).collect::<Vec<_>>());
    let (auc_m, auc_sd) = mean_sd(&summaries.iter().map(|s| s.auc).collect::<Vec<_>>());
    for (label, s, p, a) in [("mean", sens_m, spec_m, auc_m), ("sd", sens_sd, spec_sd, auc_sd)] {
        w.write_record([label.to_string(), String::new(), fmt_opt(s), fmt_opt(p), fmt_opt(a)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    info!(
        "{} trials: sensitivity {} specificity {} auc {}",
        summaries.len(),
        fmt_opt(sens_m),
        fmt_opt(spec_m),
        fmt_opt(auc_m)
    );
    Ok(0)
}

/// Re-runs the configuration recorded in a manifest.
pub fn run_manifest(path: &Path) -> Result<i32> {
    let manifest: RunManifest = crate::io::read_structured(path)?;
    run(&manifest.config)
}

pub fn run(config: &RunConfig) -> Result<i32> {
    match config {
        RunConfig::Fit(c) => run_fit(c),
        RunConfig::Simulate(c) => run_simulate(c),
        RunConfig::Eval(c) => run_eval(c),
    }
}
