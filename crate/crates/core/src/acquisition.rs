//! Selection policies over finite domains.
//!
//! All policies break score ties toward the lowest grid index so that traces
//! replay deterministically.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::domain::FiniteGrid;
use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::sampling::SamplePath;
use crate::special::{normal_cdf, normal_pdf};

/// Outcome of one selection step.
#[derive(Debug, Clone)]
pub struct AcquisitionRecord {
    pub chosen_index: usize,
    pub chosen: Vec<f64>,
    /// Value of the policy's objective at the chosen point.
    pub score: f64,
    /// Realized confidence quantity: `eta_t` for TS, `xi_t` for PIMS,
    /// `beta^(1/2)` or `zeta^(1/2)` for UCB policies, the score for EI/PI.
    pub confidence: f64,
    /// Maximum of the sample path over the domain, when a path was used.
    pub g_star: Option<f64>,
    pub posterior_std_at_choice: f64,
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Thompson sampling: evaluate the path maximizer.
/// `eta_t = (g_t(x_t) - mu(x_t)) / sigma(x_t)`.
pub fn select_ts(
    post: &GpPosterior,
    grid: &FiniteGrid,
    path: &SamplePath,
) -> Result<AcquisitionRecord> {
    let values = path.eval_on(grid)?;
    let idx = argmax_lowest(&values);
    let (mean, var) = post.mean_var(grid.point(idx))?;
    let std = var.sqrt();
    let eta = (values[idx] - mean) / std;
    Ok(AcquisitionRecord {
        chosen_index: idx,
        chosen: grid.point(idx).to_vec(),
        score: values[idx],
        confidence: eta,
        g_star: Some(values[idx]),
        posterior_std_at_choice: std,
    })
}

/// PI from the sample-path maximum: minimize `(g* - mu(x)) / sigma(x)`.
/// The attained minimum is the realized confidence parameter `xi_t`, which
/// may be negative.
pub fn select_pims(
    post: &GpPosterior,
    grid: &FiniteGrid,
    path: &SamplePath,
) -> Result<AcquisitionRecord> {
    let values = path.eval_on(grid)?;
    let g_star = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (means, stds) = post.mean_std_many(grid.points())?;
    let scores: Vec<f64> = means
        .iter()
        .zip(&stds)
        .map(|(m, s)| (g_star - m) / s)
        .collect();
    let idx = argmin_lowest(&scores);
    Ok(AcquisitionRecord {
        chosen_index: idx,
        chosen: grid.point(idx).to_vec(),
        score: scores[idx],
        confidence: scores[idx],
        g_star: Some(g_star),
        posterior_std_at_choice: stds[idx],
    })
}

/// GP-UCB with an externally supplied confidence width.
pub fn select_gp_ucb(
    post: &GpPosterior,
    grid: &FiniteGrid,
    beta_sqrt: f64,
) -> Result<AcquisitionRecord> {
    if !(beta_sqrt.is_finite() && beta_sqrt >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta_sqrt",
            reason: format!("must be finite and nonnegative, got {beta_sqrt}"),
        });
    }
    let (means, stds) = post.mean_std_many(grid.points())?;
    let scores: Vec<f64> = means
        .iter()
        .zip(&stds)
        .map(|(m, s)| m + beta_sqrt * s)
        .collect();
    let idx = argmax_lowest(&scores);
    Ok(AcquisitionRecord {
        chosen_index: idx,
        chosen: grid.point(idx).to_vec(),
        score: scores[idx],
        confidence: beta_sqrt,
        g_star: None,
        posterior_std_at_choice: stds[idx],
    })
}

/// Expected improvement over a finite incumbent.
pub fn select_ei(
    post: &GpPosterior,
    grid: &FiniteGrid,
    incumbent: f64,
) -> Result<AcquisitionRecord> {
    if !incumbent.is_finite() {
        return Err(Error::NonFinite {
            context: "incumbent",
        });
    }
    let (means, stds) = post.mean_std_many(grid.points())?;
    let scores: Vec<f64> = means
        .iter()
        .zip(&stds)
        .map(|(m, s)| {
            if *s <= 0.0 {
                return (m - incumbent).max(0.0);
            }
            let z = (m - incumbent) / s;
            (m - incumbent) * normal_cdf(z) + s * normal_pdf(z)
        })
        .collect();
    let idx = argmax_lowest(&scores);
    Ok(AcquisitionRecord {
        chosen_index: idx,
        chosen: grid.point(idx).to_vec(),
        score: scores[idx],
        confidence: scores[idx],
        g_star: None,
        posterior_std_at_choice: stds[idx],
    })
}

/// Classic probability of improvement over the best observation: maximize
/// the standardized gap `(mu(x) - incumbent) / sigma(x)`.
pub fn select_pi_classic(
    post: &GpPosterior,
    grid: &FiniteGrid,
    incumbent: f64,
) -> Result<AcquisitionRecord> {
    if !incumbent.is_finite() {
        return Err(Error::NonFinite {
            context: "incumbent",
        });
    }
    let (means, stds) = post.mean_std_many(grid.points())?;
    let scores: Vec<f64> = means
        .iter()
        .zip(&stds)
        .map(|(m, s)| (m - incumbent) / s)
        .collect();
    let idx = argmax_lowest(&scores);
    Ok(AcquisitionRecord {
        chosen_index: idx,
        chosen: grid.point(idx).to_vec(),
        score: scores[idx],
        confidence: scores[idx],
        g_star: None,
        posterior_std_at_choice: stds[idx],
    })
}

/// Theoretical GP-UCB confidence parameter
/// `beta_t = 2 log(|X| t^2 / sqrt(2 pi))`, clamped at zero.
pub fn beta_theoretical(cardinality: usize, t: usize) -> f64 {
    let t = t as f64;
    let arg = cardinality as f64 * t * t / (2.0 * std::f64::consts::PI).sqrt();
    (2.0 * arg.ln()).max(0.0)
}

/// Heuristic confidence parameter `beta_t = 0.2 d log(2t)`.
pub fn beta_heuristic(d: usize, t: usize) -> f64 {
    0.2 * d as f64 * (2.0 * t as f64).ln()
}

/// Draw from the two-parameter exponential: `shift + Exp(rate)`.
/// The mean is `shift + 1/rate`.
pub fn draw_zeta<R: Rng + ?Sized>(shift: f64, rate: f64, rng: &mut R) -> f64 {
    debug_assert!(shift >= 0.0 && rate > 0.0);
    let exp = Exp::new(rate).expect("positive rate");
    shift + exp.sample(rng)
}

/// Report of the exact identity tying PIMS to UCB with `beta^(1/2) = xi_t`.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub xi: f64,
    pub pims_choice: Vec<f64>,
    pub ucb_choice: Vec<f64>,
    pub pims_indices: Vec<usize>,
    pub ucb_indices: Vec<usize>,
    pub max_ucb: f64,
    pub scores_agree: bool,
}

const EQUIV_TOL: f64 = 1e-8;

/// Checks that minimizing `(g* - mu)/sigma` and maximizing `mu + xi sigma`
/// pick the same points and that the UCB maximum equals `g*` exactly.
pub fn verify_equivalence(
    post: &GpPosterior,
    grid: &FiniteGrid,
    g_star: f64,
) -> Result<EquivalenceReport> {
    if !g_star.is_finite() {
        return Err(Error::NonFinite { context: "g_star" });
    }
    let (means, stds) = post.mean_std_many(grid.points())?;
    let pims_scores: Vec<f64> = means
        .iter()
        .zip(&stds)
        .map(|(m, s)| (g_star - m) / s)
        .collect();
    let xi = pims_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let ucb_scores: Vec<f64> = means.iter().zip(&stds).map(|(m, s)| m + xi * s).collect();
    let max_ucb = ucb_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let tie_tol = 1e-9 * (1.0 + xi.abs()).max(1.0 + max_ucb.abs());
    let pims_indices: Vec<usize> = pims_scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= xi + tie_tol)
        .map(|(i, _)| i)
        .collect();
    let ucb_indices: Vec<usize> = ucb_scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= max_ucb - tie_tol)
        .map(|(i, _)| i)
        .collect();
    let scores_agree = (max_ucb - g_star).abs() <= EQUIV_TOL && pims_indices == ucb_indices;
    Ok(EquivalenceReport {
        xi,
        pims_choice: grid.point(pims_indices[0]).to_vec(),
        ucb_choice: grid.point(ucb_indices[0]).to_vec(),
        pims_indices,
        ucb_indices,
        max_ucb,
        scores_agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Dataset;
    use crate::kernel::KernelSpec;
    use crate::rng::derive_rng;

    fn prior() -> GpPosterior {
        let kernel = KernelSpec::rbf(0.5).unwrap();
        GpPosterior::fit(kernel, Dataset::empty(1e-6).unwrap()).unwrap()
    }

    fn grid3() -> FiniteGrid {
        FiniteGrid::new(vec![vec![0.1], vec![0.5], vec![0.9]]).unwrap()
    }

    fn grid_path(grid: &FiniteGrid, values: Vec<f64>) -> SamplePath {
        SamplePath::Grid {
            grid: grid.clone(),
            values,
        }
    }

    #[test]
    fn ts_picks_argmax() {
        let grid = grid3();
        let path = grid_path(&grid, vec![0.1, 0.9, 0.3]);
        let rec = select_ts(&prior(), &grid, &path).unwrap();
        assert_eq!(rec.chosen_index, 1);
        assert_eq!(rec.g_star, Some(0.9));
    }

    #[test]
    fn ts_eta_on_prior_is_path_value() {
        let grid = grid3();
        let path = grid_path(&grid, vec![0.2, -0.4, 0.7]);
        let rec = select_ts(&prior(), &grid, &path).unwrap();
        assert!((rec.confidence - 0.7).abs() < 1e-12);
    }

    #[test]
    fn ts_ties_to_lowest_index() {
        let grid = grid3();
        let path = grid_path(&grid, vec![0.5, 0.5, 0.5]);
        let rec = select_ts(&prior(), &grid, &path).unwrap();
        assert_eq!(rec.chosen_index, 0);
    }

    #[test]
    fn pims_prior_tie_and_xi() {
        let grid = grid3();
        let path = grid_path(&grid, vec![0.3, 0.8, -0.1]);
        let rec = select_pims(&prior(), &grid, &path).unwrap();
        // All scores equal g* on the prior, so the tie rule picks index 0.
        assert_eq!(rec.chosen_index, 0);
        assert!((rec.confidence - 0.8).abs() < 1e-12);
        assert_eq!(rec.g_star, Some(0.8));
    }

    #[test]
    fn gp_ucb_hand_example() {
        // mu = [0, 0.5], sigma = [1, 0.1] -> scores [1, 0.6] at beta^(1/2)=1.
        let kernel = KernelSpec::rbf(0.05).unwrap();
        let data = Dataset::new(vec![vec![0.5]], vec![0.5055], 0.01).unwrap();
        let post = GpPosterior::fit(kernel, data).unwrap();
        let grid = FiniteGrid::new(vec![vec![10.0], vec![0.5]]).unwrap();
        let (means, stds) = post.mean_std_many(grid.points()).unwrap();
        assert!(means[0].abs() < 1e-9 && (stds[0] - 1.0).abs() < 1e-9);
        // mu = 0.5055/1.01, sigma = sqrt(1 - 1/1.01)
        assert!((means[1] - 0.5004950495049504).abs() < 1e-9);
        assert!((stds[1] - (1.0_f64 - 1.0 / 1.01).sqrt()).abs() < 1e-9);
        let rec = select_gp_ucb(&post, &grid, 1.0).unwrap();
        assert_eq!(rec.chosen_index, 0);
    }

    #[test]
    fn gp_ucb_zero_beta_maximizes_mean() {
        let kernel = KernelSpec::rbf(0.3).unwrap();
        let data = Dataset::new(vec![vec![0.1], vec![0.9]], vec![-1.0, 2.0], 1e-6).unwrap();
        let post = GpPosterior::fit(kernel, data).unwrap();
        let grid = grid3();
        let rec = select_gp_ucb(&post, &grid, 0.0).unwrap();
        let (means, _) = post.mean_std_many(grid.points()).unwrap();
        assert_eq!(rec.chosen_index, argmax_lowest(&means));
    }

    #[test]
    fn gp_ucb_prior_ties_to_index_zero() {
        let rec = select_gp_ucb(&prior(), &grid3(), 2.0).unwrap();
        assert_eq!(rec.chosen_index, 0);
    }

    #[test]
    fn beta_theoretical_values() {
        let b = beta_theoretical(10_000, 1);
        assert!((b - 16.582787).abs() < 1e-4, "got {b}");
        assert_eq!(beta_theoretical(1, 1), 0.0);
        assert!(beta_theoretical(2, 2) > beta_theoretical(2, 1));
    }

    #[test]
    fn beta_heuristic_values() {
        assert!((beta_heuristic(4, 1) - 0.8 * 2.0_f64.ln()).abs() < 1e-12);
        assert!((beta_heuristic(1, 1) - 0.13862943611198905).abs() < 1e-12);
        assert!((beta_heuristic(6, 3) - 2.0 * beta_heuristic(3, 3)).abs() < 1e-12);
    }

    #[test]
    fn zeta_mean_and_support() {
        let mut rng = derive_rng(77, &[]);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for _ in 0..n {
            let z = draw_zeta(0.0, 0.5, &mut rng);
            sum += z;
            min = min.min(z);
        }
        let mean = sum / n as f64;
        assert!((mean - 2.0).abs() < 0.01, "mean {mean}");
        assert!(min >= 0.0);
        let shifted = draw_zeta(1.5, 0.5, &mut rng);
        assert!(shifted >= 1.5);
    }

    #[test]
    fn ei_prior_value_is_pdf_at_zero() {
        let grid = grid3();
        let rec = select_ei(&prior(), &grid, 0.0).unwrap();
        assert_eq!(rec.chosen_index, 0);
        assert!((rec.score - 0.3989422804014327).abs() < 1e-12);
    }

    #[test]
    fn ei_nonnegative_and_vanishes_without_improvement() {
        let kernel = KernelSpec::rbf(0.2).unwrap();
        let data = Dataset::new(vec![vec![0.5]], vec![0.0], 1e-9).unwrap();
        let post = GpPosterior::fit(kernel, data).unwrap();
        let grid = grid3();
        let (means, stds) = post.mean_std_many(grid.points()).unwrap();
        for (i, x) in grid.iter().enumerate() {
            let one = FiniteGrid::new(vec![x.to_vec()]).unwrap();
            let rec = select_ei(&post, &one, 5.0).unwrap();
            assert!(rec.score >= 0.0);
            // Far above every mean, with small sigma at the data point, EI
            // must be essentially zero there.
            if stds[i] < 1e-3 && means[i] <= 5.0 {
                assert!(rec.score < 1e-6);
            }
        }
    }

    #[test]
    fn ei_rejects_non_finite_incumbent() {
        assert!(select_ei(&prior(), &grid3(), f64::NEG_INFINITY).is_err());
        assert!(select_pi_classic(&prior(), &grid3(), f64::INFINITY).is_err());
    }

    #[test]
    fn pi_prior_ties_to_index_zero() {
        let rec = select_pi_classic(&prior(), &grid3(), 0.3).unwrap();
        assert_eq!(rec.chosen_index, 0);
    }

    #[test]
    fn pi_matches_pims_scoring_with_incumbent_as_gstar() {
        let kernel = KernelSpec::rbf(0.3).unwrap();
        let data = Dataset::new(vec![vec![0.2], vec![0.7]], vec![0.4, -0.9], 1e-3).unwrap();
        let post = GpPosterior::fit(kernel, data).unwrap();
        let grid = grid3();
        let incumbent = 0.4;
        let pi = select_pi_classic(&post, &grid, incumbent).unwrap();
        let path = grid_path(&grid, vec![incumbent; 3]);
        let pims = select_pims(&post, &grid, &path).unwrap();
        assert_eq!(pi.chosen_index, pims.chosen_index);
        assert!((pi.score + pims.score).abs() < 1e-12);
    }

    #[test]
    fn equivalence_on_prior() {
        let report = verify_equivalence(&prior(), &grid3(), 1.0).unwrap();
        assert!((report.xi - 1.0).abs() < 1e-12);
        assert!((report.max_ucb - 1.0).abs() < 1e-12);
        assert!(report.scores_agree);
    }

    #[test]
    fn equivalence_singleton() {
        let kernel = KernelSpec::rbf(0.5).unwrap();
        let data = Dataset::new(vec![vec![0.0]], vec![1.0], 1.0).unwrap();
        let post = GpPosterior::fit(kernel, data).unwrap();
        let grid = FiniteGrid::new(vec![vec![0.0]]).unwrap();
        let report = verify_equivalence(&post, &grid, 2.0).unwrap();
        let (m, v) = post.mean_var(&[0.0]).unwrap();
        assert!((report.xi - (2.0 - m) / v.sqrt()).abs() < 1e-12);
        assert_eq!(report.pims_indices, vec![0]);
        assert_eq!(report.ucb_indices, vec![0]);
        assert!(report.scores_agree);
    }

    #[test]
    fn selection_is_repeatable() {
        let kernel = KernelSpec::rbf(0.3).unwrap();
        let data = Dataset::new(vec![vec![0.4], vec![0.6]], vec![0.2, -0.1], 1e-4).unwrap();
        let post = GpPosterior::fit(kernel, data).unwrap();
        let grid = grid3();
        let path = grid_path(&grid, vec![0.15, 0.25, 0.2]);
        let a = select_pims(&post, &grid, &path).unwrap();
        let b = select_pims(&post, &grid, &path).unwrap();
        assert_eq!(a.chosen_index, b.chosen_index);
        assert_eq!(a.score, b.score);
        assert_eq!(a.confidence, b.confidence);
    }
}
