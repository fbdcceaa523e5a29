//! Machine-checkable forms of the regret-bound ingredients: information
//! gain, the bound constants, discretization lattices, and Monte-Carlo
//! verifiers for the tail and moment inequalities.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, FiniteGrid};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpPosterior};
use crate::harness::RunTrace;
use crate::kernel::KernelSpec;
use crate::sampling::GridSampler;
use crate::special::normal_sf;

/// Constants of the finite-domain cumulative-regret bound
/// `sqrt(C1 C2 T gamma_T)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundConstants {
    /// `2 / log(1 + 1/sigma^2)`.
    pub c1: f64,
    /// `2 + 2 log(|X| / 2)`.
    pub c2: f64,
}

pub fn bound_constants(noise_var: f64, cardinality: usize) -> BoundConstants {
    BoundConstants {
        c1: 2.0 / (1.0 + noise_var.recip()).ln(),
        c2: 2.0 + 2.0 * (cardinality as f64 / 2.0).ln(),
    }
}

/// Outcome of one verifier check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifierReport {
    pub name: String,
    pub empirical: f64,
    pub bound: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// Mutual information between noisy observations and function values at a
/// point set: `1/2 log det(I + K_A / sigma^2)`.
pub fn info_gain(kernel: &KernelSpec, noise_var: f64, subset: &[Vec<f64>]) -> Result<f64> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::InvalidParameter {
            name: "noise_var",
            reason: "must be finite and positive".into(),
        });
    }
    let n = subset.len();
    if n == 0 {
        return Ok(0.0);
    }
    for (i, a) in subset.iter().enumerate() {
        for b in subset.iter().skip(i + 1) {
            if a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()) {
                return Err(Error::InvalidParameter {
                    name: "subset",
                    reason: "points must be distinct".into(),
                });
            }
        }
    }
    let mat = DMatrix::from_fn(n, n, |i, j| {
        let k = kernel.eval_raw(&subset[i], &subset[j]) / noise_var;
        if i == j {
            k + 1.0
        } else {
            k
        }
    });
    let chol = Cholesky::new(mat).ok_or(Error::FactorizationFailed {
        context: "information-gain matrix",
    })?;
    Ok(chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| v.ln())
        .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigMode {
    Exact,
    Greedy,
}

/// Maximum-information-gain estimate.
#[derive(Debug, Clone, Serialize)]
pub struct MigEstimate {
    /// Exact value, or the greedy sequential value (a lower bound).
    pub lower: f64,
    /// Certified upper bound: equals `lower` in exact mode, and
    /// `lower / (1 - 1/e)` in greedy mode by submodularity.
    pub upper: f64,
    /// Indices of the selected subset.
    pub chosen: Vec<usize>,
}

const EXACT_MIG_LIMIT: u64 = 1_000_000;

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Maximum information gain over subsets of size `t`.
///
/// Exact mode enumerates all subsets and requires `binom(|X|, t) <= 1e6`.
/// Greedy mode runs sequential maximization; the Nemhauser guarantee makes
/// `greedy / (1 - 1/e)` a certified upper bound on the true maximum.
pub fn mig(
    kernel: &KernelSpec,
    noise_var: f64,
    grid: &FiniteGrid,
    t: usize,
    mode: MigMode,
) -> Result<MigEstimate> {
    if t == 0 || t > grid.len() {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be in [1, |X|], got {t}"),
        });
    }
    match mode {
        MigMode::Exact => {
            if binomial(grid.len() as u64, t as u64) > EXACT_MIG_LIMIT {
                return Err(Error::TooLarge {
                    what: "exact MIG enumeration",
                    limit: EXACT_MIG_LIMIT,
                });
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_subset = Vec::new();
            let mut indices: Vec<usize> = (0..t).collect();
            loop {
                let pts: Vec<Vec<f64>> = indices.iter().map(|&i| grid.point(i).to_vec()).collect();
                let gain = info_gain(kernel, noise_var, &pts)?;
                if gain > best {
                    best = gain;
                    best_subset = indices.clone();
                }
                // Next lexicographic combination.
                let mut k = t;
                loop {
                    if k == 0 {
                        return Ok(MigEstimate {
                            lower: best,
                            upper: best,
                            chosen: best_subset,
                        });
                    }
                    k -= 1;
                    if indices[k] < grid.len() - (t - k) {
                        indices[k] += 1;
                        for j in k + 1..t {
                            indices[j] = indices[j - 1] + 1;
                        }
                        break;
                    }
                }
            }
        }
        MigMode::Greedy => {
            let mut chosen: Vec<usize> = Vec::with_capacity(t);
            let mut data = Dataset::empty(noise_var)?;
            let mut total = 0.0;
            for _ in 0..t {
                let post = GpPosterior::fit(*kernel, data.clone())?;
                let mut best_idx = None;
                let mut best_var = f64::NEG_INFINITY;
                for (i, x) in grid.iter().enumerate() {
                    if chosen.contains(&i) {
                        continue;
                    }
                    let (_, var) = post.mean_var(x)?;
                    if var > best_var {
                        best_var = var;
                        best_idx = Some(i);
                    }
                }
                let idx = best_idx.expect("t <= |X| leaves a candidate");
                total += 0.5 * (1.0 + best_var / noise_var).ln();
                chosen.push(idx);
                data.push(grid.point(idx).to_vec(), 0.0)?;
            }
            let upper = total / (1.0 - (-1.0_f64).exp());
            Ok(MigEstimate {
                lower: total,
                upper,
                chosen,
            })
        }
    }
}

/// Replays a trace and checks `sum_t sigma^2_{t-1}(x_t) <= C1 * gamma_upper`.
///
/// Posterior variances are recomputed from scratch with the supplied kernel,
/// conditioning on the initial design plus all earlier queries.
pub fn variance_sum_bound_check(
    trace: &RunTrace,
    kernel: &KernelSpec,
    noise_var: f64,
    gamma_upper: f64,
) -> Result<VerifierReport> {
    let c1 = bound_constants(noise_var, 2).c1;
    let mut data = Dataset::new(
        trace.init_inputs.clone(),
        trace.init_observations.clone(),
        noise_var,
    )?;
    let mut sum = 0.0;
    for step in &trace.steps {
        let post = GpPosterior::fit(*kernel, data.clone())?;
        let (_, var) = post.mean_var(&step.x)?;
        sum += var;
        data.push(step.x.clone(), step.y)?;
    }
    let bound = c1 * gamma_upper;
    Ok(VerifierReport {
        name: "variance_sum".into(),
        empirical: sum,
        bound,
        stderr: 0.0,
        pass: sum <= bound + 1e-6,
    })
}

/// Monte-Carlo check of the squared-positive-part moment bounds for the TS
/// and PIMS confidence statistics against `2 + 2 log(|X|/2)`.
///
/// Sample paths are drawn with the exact grid sampler so that no
/// approximation error enters the verdict. `pass` requires the empirical
/// mean plus three standard errors to stay below the bound.
#[derive(Debug, Clone, Serialize)]
pub struct McMomentReport {
    pub eta: VerifierReport,
    pub xi: VerifierReport,
}

pub fn mc_eta_bound<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    grid: &FiniteGrid,
    dataset: &Dataset,
    num_draws: usize,
    rng: &mut R,
) -> Result<McMomentReport> {
    if num_draws < 10_000 {
        return Err(Error::InvalidParameter {
            name: "num_draws",
            reason: format!("must be >= 10000, got {num_draws}"),
        });
    }
    let post = GpPosterior::fit(*kernel, dataset.clone())?;
    let sampler = GridSampler::new(&post, grid)?;
    let (means, stds) = post.mean_std_many(grid.points())?;
    let g = grid.len();
    let mut eta_sum = 0.0;
    let mut eta_sq = 0.0;
    let mut xi_sum = 0.0;
    let mut xi_sq = 0.0;
    for _ in 0..num_draws {
        let values = sampler.draw_values(rng);
        let mut arg = 0;
        for i in 1..g {
            if values[i] > values[arg] {
                arg = i;
            }
        }
        let eta = (values[arg] - means[arg]) / stds[arg];
        let eta_stat = if eta >= 0.0 { eta * eta } else { 0.0 };
        let g_star = values[arg];
        let mut xi = f64::INFINITY;
        for i in 0..g {
            let s = (g_star - means[i]) / stds[i];
            if s < xi {
                xi = s;
            }
        }
        let xi_stat = if xi >= 0.0 { xi * xi } else { 0.0 };
        eta_sum += eta_stat;
        eta_sq += eta_stat * eta_stat;
        xi_sum += xi_stat;
        xi_sq += xi_stat * xi_stat;
    }
    let n = num_draws as f64;
    let bound = 2.0 + 2.0 * (g as f64 / 2.0).ln();
    let make = |name: &str, sum: f64, sq: f64| {
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0);
        let stderr = (var / n).sqrt();
        VerifierReport {
            name: name.into(),
            empirical: mean,
            bound,
            stderr,
            pass: mean + 3.0 * stderr <= bound,
        }
    };
    Ok(McMomentReport {
        eta: make("eta_sq_moment", eta_sum, eta_sq),
        xi: make("xi_sq_moment", xi_sum, xi_sq),
    })
}

/// Checks the Gaussian tail bound `1 - Phi(c) <= exp(-c^2/2) / 2` on a list
/// of nonnegative thresholds.
pub fn gauss_tail_check(c_values: &[f64]) -> Result<VerifierReport> {
    const TOL: f64 = 1e-12;
    let mut worst = f64::NEG_INFINITY;
    for &c in c_values {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("thresholds must be nonnegative, got {c}"),
            });
        }
        let excess = normal_sf(c) - 0.5 * (-0.5 * c * c).exp();
        worst = worst.max(excess);
    }
    if c_values.is_empty() {
        worst = 0.0;
    }
    Ok(VerifierReport {
        name: "gauss_tail".into(),
        empirical: worst,
        bound: TOL,
        stderr: 0.0,
        pass: worst <= TOL,
    })
}

/// Uniform lattice of cell centers over `[0, r]^d` with `tau` divisions per
/// dimension, together with the nearest-point rounding map used in the
/// continuous-domain analysis.
#[derive(Debug, Clone)]
pub struct Discretization {
    tau: usize,
    dim: usize,
    r: f64,
}

const DISCRETIZATION_LIMIT: u64 = 10_000_000;

/// Builds the lattice, refusing sizes `tau^d` beyond an enumeration limit.
pub fn build_discretization(bx: &BoxDomain, tau: usize) -> Result<Discretization> {
    if tau == 0 {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: "must be >= 1".into(),
        });
    }
    (tau as u64)
        .checked_pow(bx.dim() as u32)
        .filter(|&s| s <= DISCRETIZATION_LIMIT)
        .ok_or(Error::TooLarge {
            what: "discretization size",
            limit: DISCRETIZATION_LIMIT,
        })?;
    Ok(Discretization {
        tau,
        dim: bx.dim(),
        r: bx.r(),
    })
}

impl Discretization {
    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> u64 {
        (self.tau as u64).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Worst-case L1 rounding error `d r / tau` (the cell-center lattice
    /// actually achieves `d r / (2 tau)`).
    pub fn sup_l1_bound(&self) -> f64 {
        self.dim as f64 * self.r / self.tau as f64
    }

    fn cell(&self, coord: f64) -> usize {
        let h = self.r / self.tau as f64;
        let u = coord / h;
        let f = u.floor();
        // A coordinate exactly on a cell boundary is equidistant from two
        // centers; ties go to the smaller coordinate.
        let mut idx = if u == f && f > 0.0 { f - 1.0 } else { f };
        if idx < 0.0 {
            idx = 0.0;
        }
        (idx as usize).min(self.tau - 1)
    }

    fn center(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.r / self.tau as f64
    }

    /// Nearest lattice point in L1 distance.
    pub fn nearest(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(x.iter().map(|&c| self.center(self.cell(c))).collect())
    }

    /// Lattice point for a flat index, last dimension varying fastest.
    pub fn point_at(&self, flat: u64) -> Vec<f64> {
        let mut rem = flat;
        let mut out = vec![0.0; self.dim];
        for j in (0..self.dim).rev() {
            out[j] = self.center((rem % self.tau as u64) as usize);
            rem /= self.tau as u64;
        }
        out
    }
}

/// Discretization resolution for the TS continuous-domain bound:
/// `tau_t = ceil(d r L t^2)` with
/// `L = max(L_sigma, b (sqrt(log(a d)) + sqrt(pi)/2))`.
pub fn tau_ts(t: u64, d: usize, r: f64, a: f64, b: f64, kernel: &KernelSpec) -> u64 {
    debug_assert!(a >= 1.0 && b > 0.0 && t >= 1);
    let l_sigma = kernel.lipschitz_sigma();
    let l_smooth = b * ((a * d as f64).ln().sqrt() + std::f64::consts::PI.sqrt() / 2.0);
    let l = l_sigma.max(l_smooth);
    (d as f64 * r * l * (t * t) as f64).ceil() as u64
}

/// Log-cardinality constant for the PIMS continuous-domain bound:
/// `m_t = 2 d log(ceil(t^2 b d r (log(a d) + sqrt(pi)/2)
/// sqrt((sigma^2 + n_t)/sigma^2))) - 2 log 2 + 2`.
pub fn m_t_pims(t: u64, d: usize, r: f64, a: f64, b: f64, noise_var: f64, n_t: usize) -> f64 {
    debug_assert!(a >= 1.0 && b > 0.0 && t >= 1);
    let inner = ((t * t) as f64
        * b
        * d as f64
        * r
        * ((a * d as f64).ln() + std::f64::consts::PI.sqrt() / 2.0)
        * ((noise_var + n_t as f64) / noise_var).sqrt())
    .ceil();
    2.0 * d as f64 * inner.ln() - 2.0 * 2.0_f64.ln() + 2.0
}

/// Finite-domain Bayesian cumulative regret bound
/// `sqrt(C1 C2 T gamma_upper)`.
pub fn bcr_bound_finite(
    cardinality: usize,
    horizon: usize,
    noise_var: f64,
    gamma_upper: f64,
) -> f64 {
    let c = bound_constants(noise_var, cardinality);
    (c.c1 * c.c2 * horizon as f64 * gamma_upper).sqrt()
}
