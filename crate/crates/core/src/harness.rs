//! Synthetic objectives, the BO loop, and regret diagnostics.
//!
//! Trials are paired: every policy run in a trial sees the same objective
//! draw and the same initial design. Observation noise is shared across
//! policies only when `common_random_numbers` is set.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::acquisition::{
    beta_heuristic, beta_theoretical, draw_zeta, select_ei, select_gp_ucb, select_pi_classic,
    select_pims, select_ts, AcquisitionRecord,
};
use crate::domain::FiniteGrid;
use crate::error::{Error, Result};
use crate::gp::{fit_lengthscale, Dataset, GpPosterior};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::rng::{derive_rng, stream};
use crate::sampling::{build_rff, draw_posterior_sample, exact_grid_sample, GridSampler};

/// Selection policies available to the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Ts,
    Pims,
    GpUcbTheoretical,
    GpUcbHeuristic,
    IrGpUcbTheoretical,
    IrGpUcbHeuristic,
    Ei,
    Pi,
}

impl Policy {
    pub const ALL: [Policy; 8] = [
        Policy::Ts,
        Policy::Pims,
        Policy::GpUcbTheoretical,
        Policy::GpUcbHeuristic,
        Policy::IrGpUcbTheoretical,
        Policy::IrGpUcbHeuristic,
        Policy::Ei,
        Policy::Pi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Ts => "ts",
            Policy::Pims => "pims",
            Policy::GpUcbTheoretical => "gpucb_theoretical",
            Policy::GpUcbHeuristic => "gpucb_heuristic",
            Policy::IrGpUcbTheoretical => "irgpucb_theoretical",
            Policy::IrGpUcbHeuristic => "irgpucb_heuristic",
            Policy::Ei => "ei",
            Policy::Pi => "pi",
        }
    }

    pub fn parse(s: &str) -> Option<Policy> {
        Policy::ALL.iter().copied().find(|p| p.name() == s)
    }

    /// Whether the recorded confidence field is a beta/zeta/xi style
    /// parameter worth tracking over time.
    pub fn carries_confidence(&self) -> bool {
        !matches!(self, Policy::Ei | Policy::Pi)
    }

    fn stream_tag(&self) -> u64 {
        match self {
            Policy::Ts => 11,
            Policy::Pims => 12,
            Policy::GpUcbTheoretical => 13,
            Policy::GpUcbHeuristic => 14,
            Policy::IrGpUcbTheoretical => 15,
            Policy::IrGpUcbHeuristic => 16,
            Policy::Ei => 17,
            Policy::Pi => 18,
        }
    }
}

/// A synthetic objective: one exact prior draw tabulated on a finite grid.
#[derive(Debug, Clone)]
pub struct Objective {
    pub grid: FiniteGrid,
    pub true_values: Vec<f64>,
    pub f_star: f64,
    pub x_star_index: usize,
}

/// Draws an objective as an exact sample of the zero-mean prior on the grid.
pub fn gen_objective<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    grid: &FiniteGrid,
    rng: &mut R,
) -> Result<Objective> {
    let prior = GpPosterior::fit(*kernel, Dataset::empty(1.0)?)?;
    let sampler = GridSampler::new(&prior, grid)?;
    let true_values = sampler.draw_values(rng);
    let mut x_star_index = 0;
    for (i, &v) in true_values.iter().enumerate().skip(1) {
        if v > true_values[x_star_index] {
            x_star_index = i;
        }
    }
    let f_star = true_values[x_star_index];
    Ok(Objective {
        grid: grid.clone(),
        true_values,
        f_star,
        x_star_index,
    })
}

/// Per-step outcome of the BO loop.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// 1-based iteration index.
    pub t: usize,
    pub x: Vec<f64>,
    pub chosen_index: usize,
    /// Noisy observation.
    pub y: f64,
    /// Noise-free objective value at the query.
    pub f_value: f64,
    pub acquisition: AcquisitionRecord,
    /// Recommendation `argmax mu_{t-1}` before observing `y_t`.
    pub recommendation_index: usize,
    pub recommendation_f: f64,
}

/// Full trajectory of one policy on one objective.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub policy: Policy,
    pub kernel: KernelSpec,
    pub noise_var: f64,
    pub init_inputs: Vec<Vec<f64>>,
    pub init_observations: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

/// Runner parameters shared across policies and trials.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub horizon: usize,
    pub init_count: usize,
    pub noise_var: f64,
    /// Refit the lengthscale by marginal-likelihood grid search after every
    /// this many steps; 0 disables refitting.
    pub refit_every: usize,
    pub lengthscale_candidates: Vec<f64>,
    pub rff_features: usize,
    pub common_random_numbers: bool,
    pub master_seed: u64,
    pub trial: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            horizon: 50,
            init_count: 5,
            noise_var: 1e-6,
            refit_every: 0,
            lengthscale_candidates: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            rff_features: 2000,
            common_random_numbers: false,
            master_seed: 0,
            trial: 0,
        }
    }
}

/// Latin-hypercube style initial design: per-dimension stratified
/// permutation sampling in the bounding box, snapped to the nearest grid
/// point. Designs with duplicate snapped indices are redrawn; if duplicates
/// persist, they are replaced by the lowest unused grid indices.
fn initial_design<R: Rng + ?Sized>(
    grid: &FiniteGrid,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let d = grid.dim();
    let upper: Vec<f64> = (0..d)
        .map(|j| grid.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    for _attempt in 0..50 {
        let mut coords = vec![vec![0.0; count]; d];
        for j in 0..d {
            let mut perm: Vec<usize> = (0..count).collect();
            // Fisher-Yates driven by the same stream as the offsets.
            for i in (1..count).rev() {
                let k = rng.random_range(0..=i);
                perm.swap(i, k);
            }
            for i in 0..count {
                let u: f64 = rng.random();
                coords[j][i] = (perm[i] as f64 + u) * upper[j] / count as f64;
            }
        }
        let mut indices = Vec::with_capacity(count);
        for point_idx in 0..count {
            let x: Vec<f64> = coords.iter().map(|col| col[point_idx]).collect();
            indices.push(grid.nearest_index(&x)?);
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() == count {
            return Ok(indices);
        }
        if grid.len() < count {
            // Not enough distinct points; keep the duplicates.
            return Ok(indices);
        }
    }
    // Deterministic fallback: first occurrences keep their snap, duplicates
    // take the lowest unused indices.
    let mut used = vec![false; grid.len()];
    let mut indices = Vec::with_capacity(count);
    for _ in 0..count {
        let next = used.iter().position(|u| !u).unwrap_or(0);
        used[next] = true;
        indices.push(next);
    }
    Ok(indices)
}

/// Best noisy observation so far; falls back to the prior mean when there is
/// no data yet.
fn incumbent(data: &Dataset) -> f64 {
    if data.is_empty() {
        0.0
    } else {
        data.observations()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs one policy on one objective for `settings.horizon` steps.
pub fn run_bo(
    objective: &Objective,
    kernel: &KernelSpec,
    policy: Policy,
    settings: &RunSettings,
) -> Result<RunTrace> {
    if settings.horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be >= 1".into(),
        });
    }
    let grid = &objective.grid;
    let d = grid.dim();
    let noise_var = settings.noise_var;
    let seed = settings.master_seed;
    let trial = settings.trial;

    let mut init_rng = derive_rng(seed, &[trial, stream::INIT_DESIGN]);
    let init_indices = initial_design(grid, settings.init_count, &mut init_rng)?;
    let noise_std = noise_var.sqrt();
    let mut init_inputs = Vec::with_capacity(init_indices.len());
    let mut init_observations = Vec::with_capacity(init_indices.len());
    for &idx in &init_indices {
        let eps: f64 = init_rng.sample::<f64, _>(StandardNormal) * noise_std;
        init_inputs.push(grid.point(idx).to_vec());
        init_observations.push(objective.true_values[idx] + eps);
    }

    let mut data = Dataset::new(init_inputs.clone(), init_observations.clone(), noise_var)?;
    let mut current_kernel = *kernel;
    let mut steps = Vec::with_capacity(settings.horizon);

    for t in 1..=settings.horizon {
        if settings.refit_every > 0 && t > 1 && (t - 1) % settings.refit_every == 0 {
            current_kernel = fit_lengthscale(
                current_kernel.family(),
                &data,
                &settings.lengthscale_candidates,
            )?;
        }
        let post = GpPosterior::fit(current_kernel, data.clone())?;

        let acquisition = match policy {
            Policy::Ts | Policy::Pims => {
                let mut path_rng = derive_rng(seed, &[trial, t as u64, stream::SAMPLE_PATH]);
                let path = match current_kernel.family() {
                    KernelFamily::Linear => exact_grid_sample(&post, grid, &mut path_rng)?,
                    _ => {
                        let map =
                            build_rff(&current_kernel, d, settings.rff_features, &mut path_rng)?;
                        draw_posterior_sample(&post, &map, &mut path_rng)?
                    }
                };
                if policy == Policy::Ts {
                    select_ts(&post, grid, &path)?
                } else {
                    select_pims(&post, grid, &path)?
                }
            }
            Policy::GpUcbTheoretical => {
                let beta = beta_theoretical(grid.len(), t);
                select_gp_ucb(&post, grid, beta.sqrt())?
            }
            Policy::GpUcbHeuristic => {
                let beta = beta_heuristic(d, t);
                select_gp_ucb(&post, grid, beta.sqrt())?
            }
            Policy::IrGpUcbTheoretical | Policy::IrGpUcbHeuristic => {
                let shift = match policy {
                    Policy::IrGpUcbTheoretical => (2.0 * (grid.len() as f64 / 2.0).ln()).max(0.0),
                    _ => 2.0 / d as f64,
                };
                let mut zeta_rng =
                    derive_rng(seed, &[trial, t as u64, policy.stream_tag(), stream::ZETA]);
                let zeta = draw_zeta(shift, 0.5, &mut zeta_rng);
                select_gp_ucb(&post, grid, zeta.sqrt())?
            }
            Policy::Ei => select_ei(&post, grid, incumbent(&data))?,
            Policy::Pi => select_pi_classic(&post, grid, incumbent(&data))?,
        };

        let (means, _) = post.mean_std_many(grid.points())?;
        let mut rec_idx = 0;
        for (i, &m) in means.iter().enumerate().skip(1) {
            if m > means[rec_idx] {
                rec_idx = i;
            }
        }

        let mut noise_rng = if settings.common_random_numbers {
            derive_rng(seed, &[trial, t as u64, stream::NOISE])
        } else {
            derive_rng(seed, &[trial, t as u64, policy.stream_tag(), stream::NOISE])
        };
        let eps: f64 = noise_rng.sample::<f64, _>(StandardNormal) * noise_std;
        let chosen_index = acquisition.chosen_index;
        let f_value = objective.true_values[chosen_index];
        let y = f_value + eps;

        data.push(grid.point(chosen_index).to_vec(), y)?;
        steps.push(StepRecord {
            t,
            x: grid.point(chosen_index).to_vec(),
            chosen_index,
            y,
            f_value,
            acquisition,
            recommendation_index: rec_idx,
            recommendation_f: objective.true_values[rec_idx],
        });
    }

    Ok(RunTrace {
        policy,
        kernel: *kernel,
        noise_var,
        init_inputs,
        init_observations,
        steps,
    })
}

/// Regret trajectories computed from noise-free objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSeries {
    /// `f* - max_{s<=t} f(x_s)`, nonincreasing.
    pub simple: Vec<f64>,
    /// Running sum of `f* - f(x_t)`, nondecreasing.
    pub cumulative: Vec<f64>,
    /// `f* - f(x_hat_t)` with the per-step recommendation.
    pub modified_simple: Vec<f64>,
}

pub fn regret_series(trace: &RunTrace, objective: &Objective) -> Result<RegretSeries> {
    let mut simple = Vec::with_capacity(trace.steps.len());
    let mut cumulative = Vec::with_capacity(trace.steps.len());
    let mut modified = Vec::with_capacity(trace.steps.len());
    let mut best = f64::NEG_INFINITY;
    let mut cum = 0.0;
    for step in &trace.steps {
        if step.chosen_index >= objective.true_values.len() {
            return Err(Error::LengthMismatch {
                context: "trace index vs objective grid",
            });
        }
        best = best.max(step.f_value);
        cum += objective.f_star - step.f_value;
        simple.push(objective.f_star - best);
        cumulative.push(cum);
        modified.push(objective.f_star - step.recommendation_f);
    }
    Ok(RegretSeries {
        simple,
        cumulative,
        modified_simple: modified,
    })
}

/// Pointwise mean and standard error over equal-length series.
#[derive(Debug, Clone)]
pub struct SeriesSummary {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub fn aggregate(series: &[&[f64]]) -> Result<SeriesSummary> {
    let Some(first) = series.first() else {
        return Err(Error::LengthMismatch {
            context: "no series to aggregate",
        });
    };
    if series.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: "standard errors need at least 2 series".into(),
        });
    }
    let len = first.len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            context: "aggregated series lengths",
        });
    }
    let n = series.len() as f64;
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for t in 0..len {
        let m: f64 = series.iter().map(|s| s[t]).sum::<f64>() / n;
        let ss: f64 = series.iter().map(|s| (s[t] - m) * (s[t] - m)).sum::<f64>();
        mean[t] = m;
        stderr[t] = (ss / (n - 1.0)).sqrt() / n.sqrt();
    }
    Ok(SeriesSummary { mean, stderr })
}

/// Per-trace mean of the evaluated posterior standard deviation
/// `sum_t sigma_{t-1}(x_t) / T`, with across-trace mean and standard
/// deviation.
#[derive(Debug, Clone)]
pub struct EvaluatedStdStats {
    pub per_trace_mean: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn evaluated_std_stats(traces: &[RunTrace]) -> Result<EvaluatedStdStats> {
    if traces.is_empty() {
        return Err(Error::LengthMismatch {
            context: "no traces",
        });
    }
    let per_trace_mean: Vec<f64> = traces
        .iter()
        .map(|tr| {
            let s: f64 = tr
                .steps
                .iter()
                .map(|st| st.acquisition.posterior_std_at_choice)
                .sum();
            s / tr.steps.len().max(1) as f64
        })
        .collect();
    let n = per_trace_mean.len() as f64;
    let mean = per_trace_mean.iter().sum::<f64>() / n;
    let std = if per_trace_mean.len() > 1 {
        (per_trace_mean
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    Ok(EvaluatedStdStats {
        per_trace_mean,
        mean,
        std,
    })
}

/// Per-step quantiles of the recorded confidence values across traces.
#[derive(Debug, Clone)]
pub struct ConfidenceQuantiles {
    pub median: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < n {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[n - 1]
    }
}

pub fn confidence_track(traces: &[RunTrace]) -> Result<ConfidenceQuantiles> {
    let Some(first) = traces.first() else {
        return Err(Error::LengthMismatch {
            context: "no traces",
        });
    };
    let len = first.steps.len();
    if traces.iter().any(|t| t.steps.len() != len) {
        return Err(Error::LengthMismatch {
            context: "trace lengths",
        });
    }
    let mut median = Vec::with_capacity(len);
    let mut q25 = Vec::with_capacity(len);
    let mut q75 = Vec::with_capacity(len);
    for t in 0..len {
        let mut vals: Vec<f64> = traces
            .iter()
            .map(|tr| tr.steps[t].acquisition.confidence)
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite confidence values"));
        median.push(quantile(&vals, 0.5));
        q25.push(quantile(&vals, 0.25));
        q75.push(quantile(&vals, 0.75));
    }
    Ok(ConfidenceQuantiles { median, q25, q75 })
}

/// Writes one trace as CSV with the columns
/// `t,policy,x0..x{d-1},y_t,f_xt,confidence,sigma_at_choice,simple_regret,cumulative_regret,modified_simple_regret`.
pub fn write_trace_csv<W: Write>(
    w: &mut W,
    trace: &RunTrace,
    series: &RegretSeries,
) -> io::Result<()> {
    let d = trace.steps.first().map_or(0, |s| s.x.len());
    write!(w, "t,policy")?;
    for j in 0..d {
        write!(w, ",x{j}")?;
    }
    writeln!(
        w,
        ",y_t,f_xt,confidence,sigma_at_choice,simple_regret,cumulative_regret,modified_simple_regret"
    )?;
    for (i, step) in trace.steps.iter().enumerate() {
        write!(w, "{},{}", step.t, trace.policy.name())?;
        for v in &step.x {
            write!(w, ",{v}")?;
        }
        writeln!(
            w,
            ",{},{},{},{},{},{},{}",
            step.y,
            step.f_value,
            step.acquisition.confidence,
            step.acquisition.posterior_std_at_choice,
            series.simple[i],
            series.cumulative[i],
            series.modified_simple[i]
        )?;
    }
    Ok(())
}
