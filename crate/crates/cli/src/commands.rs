//! Experiment orchestration, artifact emission, and the verifier suite.

use std::fs;
use std::path::{Path, PathBuf};

use gpbo::rng::stream;
use gpbo::{
    bound_constants, confidence_track, derive_rng, evaluated_std_stats, gauss_tail_check,
    gen_objective, mc_eta_bound, mig, regret_series, run_bo, variance_sum_bound_check,
    verify_equivalence, write_trace_csv, Dataset, FiniteGrid, GpPosterior, KernelFamily,
    KernelSpec, MigMode, Objective, Policy, RegretSeries, RunSettings, RunTrace, VerifierReport,
};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] gpbo::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// All traces of one trial, in the config's policy order.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: u64,
    pub objective: Objective,
    pub traces: Vec<(Policy, RunTrace)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub grid: FiniteGrid,
    pub trials: Vec<TrialResult>,
}

impl ExperimentOutcome {
    pub fn traces_for(&self, policy: Policy) -> Vec<&RunTrace> {
        self.trials
            .iter()
            .flat_map(|t| {
                t.traces
                    .iter()
                    .filter(|(p, _)| *p == policy)
                    .map(|(_, trace)| trace)
            })
            .collect()
    }

    pub fn series_for(&self, policy: Policy) -> Result<Vec<RegretSeries>, CommandError> {
        self.trials
            .iter()
            .map(|t| {
                let trace = t
                    .traces
                    .iter()
                    .find(|(p, _)| *p == policy)
                    .map(|(_, trace)| trace)
                    .expect("policy present in every trial");
                Ok(regret_series(trace, &t.objective)?)
            })
            .collect()
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CommandError> {
    let threads = if jobs == 0 { 0 } else { jobs };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CommandError::Io {
            path: PathBuf::from("<thread pool>"),
            source: std::io::Error::other(e),
        })
}

/// Runs every (trial, policy) pair. Trials share one objective draw and one
/// initial design per trial; results are ordered by trial index regardless
/// of scheduling.
pub fn execute_experiment(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<ExperimentOutcome, CommandError> {
    let grid = FiniteGrid::lattice(config.dims, config.grid_per_dim, config.box_r)?;
    let kernel = config.kernel();
    let pool = thread_pool(jobs)?;
    let trials: Result<Vec<TrialResult>, CommandError> = pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let mut obj_rng = derive_rng(config.seed, &[trial, stream::OBJECTIVE]);
                let objective = gen_objective(&kernel, &grid, &mut obj_rng)?;
                let settings = RunSettings {
                    horizon: config.horizon,
                    init_count: config.init_count,
                    noise_var: config.noise_var,
                    refit_every: config.refit_every,
                    lengthscale_candidates: config.lengthscale_candidates.clone(),
                    rff_features: config.rff_features,
                    common_random_numbers: config.common_random_numbers,
                    master_seed: config.seed,
                    trial,
                };
                let mut traces = Vec::with_capacity(config.policies.len());
                for &policy in &config.policies {
                    traces.push((policy, run_bo(&objective, &kernel, policy, &settings)?));
                }
                Ok(TrialResult {
                    trial,
                    objective,
                    traces,
                })
            })
            .collect()
    });
    Ok(ExperimentOutcome {
        config: config.clone(),
        grid,
        trials: trials?,
    })
}

fn series_summary_json(series: &[RegretSeries]) -> serde_json::Value {
    let field = |extract: fn(&RegretSeries) -> &[f64]| -> serde_json::Value {
        let rows: Vec<&[f64]> = series.iter().map(extract).collect();
        if rows.len() >= 2 {
            let agg = gpbo::aggregate(&rows).expect("equal lengths by construction");
            serde_json::json!({ "mean": agg.mean, "stderr": agg.stderr })
        } else {
            serde_json::json!({ "mean": rows[0], "stderr": null })
        }
    };
    serde_json::json!({
        "simple_regret": field(|s| &s.simple),
        "cumulative_regret": field(|s| &s.cumulative),
        "modified_simple_regret": field(|s| &s.modified_simple),
    })
}

/// Summary document: policy name -> regret summaries, evaluated-std stats,
/// and confidence quantiles.
pub fn summary_json(outcome: &ExperimentOutcome) -> Result<serde_json::Value, CommandError> {
    let mut policies = serde_json::Map::new();
    for &policy in &outcome.config.policies {
        let traces: Vec<RunTrace> = outcome.traces_for(policy).into_iter().cloned().collect();
        let series = outcome.series_for(policy)?;
        let mut entry = series_summary_json(&series);
        let std_stats = evaluated_std_stats(&traces)?;
        entry["evaluated_std"] = serde_json::json!({
            "per_trace_mean": std_stats.per_trace_mean,
            "mean": std_stats.mean,
            "std": std_stats.std,
        });
        entry["confidence_quantiles"] =
            if outcome.config.confidence_tracking && policy.carries_confidence() {
                let track = confidence_track(&traces)?;
                serde_json::json!({
                    "median": track.median,
                    "q25": track.q25,
                    "q75": track.q75,
                })
            } else {
                serde_json::Value::Null
            };
        policies.insert(policy.name().to_string(), entry);
    }
    Ok(serde_json::Value::Object(policies))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CommandError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes per-trial CSVs, `summary.json`, and `manifest.json` into
/// `out_dir`. Returns the artifact file names in write order.
pub fn write_artifacts(
    outcome: &ExperimentOutcome,
    out_dir: &Path,
) -> Result<Vec<String>, CommandError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut artifacts = Vec::new();
    for &policy in &outcome.config.policies {
        for trial in &outcome.trials {
            let trace = trial
                .traces
                .iter()
                .find(|(p, _)| *p == policy)
                .map(|(_, tr)| tr)
                .expect("policy present in every trial");
            let series = regret_series(trace, &trial.objective)?;
            let name = format!("regret_{}_{}.csv", policy.name(), trial.trial);
            let path = out_dir.join(&name);
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, trace, &series).expect("in-memory write");
            fs::write(&path, buf).map_err(io_err(&path))?;
            artifacts.push(name);
        }
    }
    let summary = summary_json(outcome)?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    artifacts.push("summary.json".into());

    let manifest = serde_json::json!({
        "config_hash": outcome.config.hash(),
        "config_text": outcome.config.to_canonical_text(),
        "seed": outcome.config.seed,
        "trials": outcome.config.trials,
        "policies": outcome.config.policies.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "artifacts": artifacts,
    });
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    let mut all = manifest["artifacts"]
        .as_array()
        .expect("array")
        .iter()
        .map(|v| v.as_str().expect("string").to_string())
        .collect::<Vec<_>>();
    all.push("manifest.json".into());
    Ok(all)
}

/// Runs the experiment and writes all artifacts into the config's output
/// directory.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<String>, CommandError> {
    let outcome = execute_experiment(config, jobs)?;
    write_artifacts(&outcome, &config.out_dir.clone())
}

const VERIFY_DRAWS: usize = 100_000;

fn random_grid<R: Rng + ?Sized>(size: usize, rng: &mut R) -> FiniteGrid {
    let pts: Vec<Vec<f64>> = (0..size)
        .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    FiniteGrid::new(pts).expect("random points are distinct")
}

fn verifier_kernel(config: &ExperimentConfig) -> KernelSpec {
    match config.kernel_family {
        KernelFamily::Linear => KernelSpec::rbf(0.25).expect("static lengthscale"),
        _ => config.kernel(),
    }
}

/// Executes the verifier suite: the Gaussian tail bound, the eta/xi moment
/// bounds at three domain sizes (prior and 5-observation posteriors), an
/// equivalence sweep, variance-sum checks on fresh TS/PIMS traces, and the
/// greedy/exact MIG sandwich on small instances.
pub fn run_verifiers(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<Vec<VerifierReport>, CommandError> {
    let pool = thread_pool(jobs)?;
    let kernel = verifier_kernel(config);
    let mut reports = Vec::new();

    let cs: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
    reports.push(gauss_tail_check(&cs)?);

    for size in [2usize, 16, 64] {
        let mut rng = derive_rng(config.seed, &[stream::VERIFIER, size as u64]);
        let grid = random_grid(size, &mut rng);
        for n_obs in [0usize, 5] {
            let inputs: Vec<Vec<f64>> = (0..n_obs)
                .map(|_| vec![rng.random(), rng.random()])
                .collect();
            let observations: Vec<f64> = (0..n_obs)
                .map(|_| 2.0 * rng.random::<f64>() - 1.0)
                .collect();
            let data = Dataset::new(inputs, observations, 0.01_f64.max(config.noise_var))?;
            let rep = mc_eta_bound(&kernel, &grid, &data, VERIFY_DRAWS, &mut rng)?;
            for (stat, mut r) in [("eta", rep.eta), ("xi", rep.xi)] {
                r.name = format!("{stat}_sq_moment_X{size}_n{n_obs}");
                reports.push(r);
            }
        }
    }

    {
        let mut rng = derive_rng(config.seed, &[stream::VERIFIER, 1000]);
        let mut worst = 0.0f64;
        let mut all_agree = true;
        for _ in 0..1000 {
            let size = rng.random_range(2..20);
            let grid = random_grid(size, &mut rng);
            let n = rng.random_range(0..6);
            let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
            let observations: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let data = Dataset::new(inputs, observations, 1e-2)?;
            let post = GpPosterior::fit(kernel, data)?;
            let g_star = 6.0 * rng.random::<f64>() - 3.0;
            let report = verify_equivalence(&post, &grid, g_star)?;
            worst = worst.max((report.max_ucb - g_star).abs());
            all_agree &= report.scores_agree;
        }
        reports.push(VerifierReport {
            name: "equivalence_sweep".into(),
            empirical: worst,
            bound: 1e-8,
            stderr: 0.0,
            pass: all_agree && worst <= 1e-8,
        });
    }

    {
        let grid = FiniteGrid::lattice(config.dims, config.grid_per_dim, config.box_r)?;
        let horizon = config.horizon.min(25);
        let trials = config.trials.min(5) as u64;
        let est = mig(&kernel, config.noise_var, &grid, horizon, MigMode::Greedy)?;
        let trace_reports: Result<Vec<Vec<VerifierReport>>, CommandError> = pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut obj_rng = derive_rng(config.seed, &[trial, stream::OBJECTIVE]);
                    let objective = gen_objective(&kernel, &grid, &mut obj_rng)?;
                    let settings = RunSettings {
                        horizon,
                        init_count: config.init_count,
                        noise_var: config.noise_var,
                        rff_features: config.rff_features,
                        master_seed: config.seed,
                        trial,
                        ..RunSettings::default()
                    };
                    let mut out = Vec::new();
                    for policy in [Policy::Ts, Policy::Pims] {
                        let trace = run_bo(&objective, &kernel, policy, &settings)?;
                        let mut rep =
                            variance_sum_bound_check(&trace, &kernel, config.noise_var, est.upper)?;
                        rep.name = format!("variance_sum_{}_{}", policy.name(), trial);
                        out.push(rep);
                    }
                    Ok(out)
                })
                .collect()
        });
        for batch in trace_reports? {
            reports.extend(batch);
        }
    }

    {
        let mut rng = derive_rng(config.seed, &[stream::VERIFIER, 2000]);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..8 {
            let size = rng.random_range(6..=12);
            let t = rng.random_range(2..=4).min(size);
            let grid = random_grid(size, &mut rng);
            let exact = mig(&kernel, 0.2, &grid, t, MigMode::Exact)?;
            let greedy = mig(&kernel, 0.2, &grid, t, MigMode::Greedy)?;
            worst = worst.max(greedy.lower - exact.lower);
            worst = worst.max(exact.lower - greedy.upper);
        }
        reports.push(VerifierReport {
            name: "mig_sandwich".into(),
            empirical: worst,
            bound: 1e-9,
            stderr: 0.0,
            pass: worst <= 1e-9,
        });
    }

    Ok(reports)
}

/// Writes the verifier reports as a JSON array, keys sorted.
pub fn write_verify_report(
    reports: &[VerifierReport],
    out_dir: &Path,
) -> Result<PathBuf, CommandError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let value = serde_json::to_value(reports).expect("serializable");
    let path = out_dir.join("verify_report.json");
    write_json(&path, &value)?;
    Ok(path)
}

/// MIG calculator for the configured kernel and domain.
pub fn mig_report(
    config: &ExperimentConfig,
    steps: Option<usize>,
    mode: MigMode,
) -> Result<serde_json::Value, CommandError> {
    let grid = FiniteGrid::lattice(config.dims, config.grid_per_dim, config.box_r)?;
    let t = steps.unwrap_or_else(|| config.horizon.min(grid.len()));
    let est = mig(&config.kernel(), config.noise_var, &grid, t, mode)?;
    Ok(serde_json::json!({
        "cardinality": grid.len(),
        "steps": t,
        "mode": match mode { MigMode::Exact => "exact", MigMode::Greedy => "greedy" },
        "gamma_lower": est.lower,
        "gamma_upper": est.upper,
        "bcr_bound": gpbo::bcr_bound_finite(grid.len(), t, config.noise_var, est.upper),
        "c1": bound_constants(config.noise_var, grid.len()).c1,
        "c2": bound_constants(config.noise_var, grid.len()).c2,
    }))
}

/// Renders one human-readable line per verifier report.
pub fn format_report_line(report: &VerifierReport) -> String {
    format!(
        "{} {:<28} empirical {:>12.6e}  bound {:>12.6e}",
        if report.pass { "PASS" } else { "FAIL" },
        report.name,
        report.empirical,
        report.bound
    )
}

/// Writes a line per report to `w`; returns the failing names.
pub fn report_failures<W: std::io::Write>(
    w: &mut W,
    reports: &[VerifierReport],
) -> std::io::Result<Vec<String>> {
    for r in reports {
        writeln!(w, "{}", format_report_line(r))?;
    }
    Ok(reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.clone())
        .collect())
}
