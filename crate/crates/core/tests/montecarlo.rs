//! Seeded Monte-Carlo validation of the samplers against the exact
//! posterior law, and of the moment verifiers at nontrivial sizes.

use gpbo::*;
use nalgebra::DMatrix;
use rand::Rng;

fn grid25() -> FiniteGrid {
    FiniteGrid::lattice(2, 5, 1.0).unwrap()
}

/// Posterior used across the agreement checks: five observations of a
/// smooth draw with moderate noise.
fn reference_posterior() -> GpPosterior {
    let kernel = KernelSpec::rbf(0.5).unwrap();
    let mut rng = derive_rng(0xB0, &[1]);
    let inputs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random(), rng.random()]).collect();
    let prior = GpPosterior::fit(kernel, Dataset::empty(1.0).unwrap()).unwrap();
    let f = exact_grid_sample(&prior, &FiniteGrid::new(inputs.clone()).unwrap(), &mut rng).unwrap();
    let obs: Vec<f64> = inputs
        .iter()
        .map(|x| f.eval(x).unwrap() + 0.1 * (rng.random::<f64>() - 0.5))
        .collect();
    GpPosterior::fit(kernel, Dataset::new(inputs, obs, 0.25).unwrap()).unwrap()
}

#[test]
fn exact_sampler_matches_posterior_covariance() {
    let post = reference_posterior();
    let grid = grid25();
    let sampler = GridSampler::new(&post, &grid).unwrap();
    let g = grid.len();
    let n = 10_000usize;
    let mut rng = derive_rng(0xC0, &[]);
    let mut sums = vec![0.0; g];
    let mut cross: DMatrix<f64> = DMatrix::zeros(g, g);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let v = sampler.draw_values(&mut rng);
        for i in 0..g {
            sums[i] += v[i];
        }
        draws.push(v);
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    for v in &draws {
        for i in 0..g {
            for j in 0..g {
                cross[(i, j)] += (v[i] - means[i]) * (v[j] - means[j]);
            }
        }
    }
    // Entrywise agreement with the analytic posterior covariance.
    let kernel = post.kernel();
    let l = post.chol_lower().unwrap();
    let crossk = DMatrix::from_fn(post.len(), g, |i, j| {
        kernel
            .eval(&post.data().inputs()[i], grid.point(j))
            .unwrap()
    });
    let w = l.solve_lower_triangular(&crossk).unwrap();
    let prior_cov = DMatrix::from_fn(g, g, |i, j| {
        kernel.eval(grid.point(i), grid.point(j)).unwrap()
    });
    let post_cov = &prior_cov - w.transpose() * &w;
    let mut worst = 0.0f64;
    for i in 0..g {
        for j in 0..g {
            worst = worst.max((cross[(i, j)] / (n - 1) as f64 - post_cov[(i, j)]).abs());
        }
    }
    assert!(worst < 0.05, "worst covariance error {worst}");
}

#[test]
fn rff_posterior_draws_match_exact_moments() {
    // The feature count here is larger than the runner default so that the
    // RFF kernel bias stays well inside the Monte-Carlo band.
    let post = reference_posterior();
    let grid = grid25();
    let (means, stds) = post.mean_std_many(grid.points()).unwrap();
    let map = build_rff(post.kernel(), 2, 8000, &mut derive_rng(0xB0, &[2, 0])).unwrap();
    let phi = map.feature_matrix(grid.points()).unwrap();
    let n = 10_000usize;
    let mut rng = derive_rng(0xB0, &[3, 0]);
    let mut sums = vec![0.0; grid.len()];
    let mut sqs = vec![0.0; grid.len()];
    for _ in 0..n {
        let path = draw_posterior_sample(&post, &map, &mut rng).unwrap();
        let vals = &phi * path.weights().unwrap();
        for (i, v) in vals.iter().enumerate() {
            sums[i] += v;
            sqs[i] += v * v;
        }
    }
    for i in 0..grid.len() {
        let mean = sums[i] / n as f64;
        let var = sqs[i] / n as f64 - mean * mean;
        let se_mean = stds[i] / (n as f64).sqrt();
        let se_var = stds[i] * stds[i] * (2.0 / n as f64).sqrt();
        assert!(
            (mean - means[i]).abs() <= 3.0 * se_mean,
            "mean mismatch at {i}: {mean} vs {} (se {se_mean})",
            means[i]
        );
        assert!(
            (var - stds[i] * stds[i]).abs() <= 3.0 * se_var,
            "var mismatch at {i}: {var} vs {} (se {se_var})",
            stds[i] * stds[i]
        );
    }
}

#[test]
fn rff_prior_and_single_point_moments() {
    let kernel = KernelSpec::rbf(0.5).unwrap();
    let prior = GpPosterior::fit(kernel, Dataset::empty(1.0).unwrap()).unwrap();
    let map = build_rff(&kernel, 1, 2000, &mut derive_rng(0xC1, &[])).unwrap();
    let n = 10_000usize;

    // Prior: variance at an arbitrary point is k(x,x) = 1.
    let x = [0.37];
    let phi_x = map.features(&x).unwrap();
    let mut rng = derive_rng(0xC2, &[]);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let path = draw_posterior_sample(&prior, &map, &mut rng).unwrap();
        let v = phi_x.dot(path.weights().unwrap());
        sum += v;
        sq += v * v;
    }
    let var = sq / n as f64 - (sum / n as f64).powi(2);
    assert!((var - 1.0).abs() < 0.05, "prior variance {var}");

    // Single observation (y=1, sigma^2=1): posterior at the data point is
    // N(0.5, 0.5).
    let data = Dataset::new(vec![vec![0.0]], vec![1.0], 1.0).unwrap();
    let post = GpPosterior::fit(kernel, data).unwrap();
    let phi0 = map.features(&[0.0]).unwrap();
    let mut rng = derive_rng(0xC3, &[]);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let path = draw_posterior_sample(&post, &map, &mut rng).unwrap();
        let v = phi0.dot(path.weights().unwrap());
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let var = sq / n as f64 - mean * mean;
    assert!((mean - 0.5).abs() < 0.03, "posterior mean {mean}");
    assert!((var - 0.5).abs() < 0.05, "posterior var {var}");
}

#[test]
fn rff_and_exact_argmax_laws_agree() {
    let post = reference_posterior();
    let grid = grid25();
    let n = 4000usize;
    let map = build_rff(post.kernel(), 2, 2000, &mut derive_rng(0xC4, &[])).unwrap();
    let phi = map.feature_matrix(grid.points()).unwrap();
    let mut rff_counts = vec![0usize; grid.len()];
    let mut rng = derive_rng(0xC5, &[]);
    for _ in 0..n {
        let path = draw_posterior_sample(&post, &map, &mut rng).unwrap();
        let vals = &phi * path.weights().unwrap();
        let mut a = 0;
        for i in 1..grid.len() {
            if vals[i] > vals[a] {
                a = i;
            }
        }
        rff_counts[a] += 1;
    }
    let sampler = GridSampler::new(&post, &grid).unwrap();
    let mut exact_counts = vec![0usize; grid.len()];
    let mut rng = derive_rng(0xC6, &[]);
    for _ in 0..n {
        let vals = sampler.draw_values(&mut rng);
        let mut a = 0;
        for i in 1..grid.len() {
            if vals[i] > vals[a] {
                a = i;
            }
        }
        exact_counts[a] += 1;
    }
    let tv: f64 = rff_counts
        .iter()
        .zip(&exact_counts)
        .map(|(a, b)| ((*a as f64 - *b as f64) / n as f64).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.1, "argmax total-variation distance {tv}");
}

#[test]
fn objective_prior_moments() {
    let kernel = KernelSpec::rbf(0.4).unwrap();
    let grid = grid25();
    let n = 10_000usize;
    let mut rng = derive_rng(0xC7, &[]);
    let mut sums = vec![0.0; grid.len()];
    let mut sqs = vec![0.0; grid.len()];
    for _ in 0..n {
        let obj = gen_objective(&kernel, &grid, &mut rng).unwrap();
        for (i, v) in obj.true_values.iter().enumerate() {
            sums[i] += v;
            sqs[i] += v * v;
        }
    }
    for i in 0..grid.len() {
        let mean = sums[i] / n as f64;
        let var = sqs[i] / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "per-point mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "per-point variance {var}");
    }
}

#[test]
fn moment_bound_holds_with_observations() {
    let kernel = KernelSpec::rbf(0.25).unwrap();
    let mut rng = derive_rng(0xC8, &[]);
    let pts: Vec<Vec<f64>> = (0..16).map(|_| vec![rng.random(), rng.random()]).collect();
    let grid = FiniteGrid::new(pts).unwrap();
    let inputs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random(), rng.random()]).collect();
    let obs: Vec<f64> = (0..5).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let data = Dataset::new(inputs, obs, 1e-2).unwrap();
    let rep = mc_eta_bound(&kernel, &grid, &data, 50_000, &mut rng).unwrap();
    assert!(
        rep.eta.pass,
        "eta {} + 3se vs bound {}",
        rep.eta.empirical, rep.eta.bound
    );
    assert!(
        rep.xi.pass,
        "xi {} + 3se vs bound {}",
        rep.xi.empirical, rep.xi.bound
    );
    assert!((rep.eta.bound - (2.0 + 2.0 * 8.0f64.ln())).abs() < 1e-12);
}

#[test]
fn ts_step_frequency_on_symmetric_prior() {
    let grid = FiniteGrid::new(vec![vec![0.0], vec![1000.0]]).unwrap();
    let kernel = KernelSpec::rbf(0.2).unwrap();
    let prior = GpPosterior::fit(kernel, Dataset::empty(1e-6).unwrap()).unwrap();
    let sampler = GridSampler::new(&prior, &grid).unwrap();
    let mut rng = derive_rng(0xB4, &[]);
    let n = 10_000usize;
    let mut count0 = 0usize;
    for _ in 0..n {
        let path = sampler.draw(&mut rng);
        if select_ts(&prior, &grid, &path).unwrap().chosen_index == 0 {
            count0 += 1;
        }
    }
    let freq = count0 as f64 / n as f64;
    assert!((freq - 0.5).abs() <= 0.01, "frequency {freq}");
}

#[test]
fn lengthscale_recovery_rate() {
    let true_kernel = KernelSpec::rbf(0.2).unwrap();
    let candidates = [0.05, 0.2, 1.0];
    let mut hits = 0;
    for rep in 0..50u64 {
        let mut rng = derive_rng(0xF17, &[rep]);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random::<f64>()]).collect();
        let grid = FiniteGrid::new(pts.clone()).unwrap();
        let prior = GpPosterior::fit(true_kernel, Dataset::empty(1.0).unwrap()).unwrap();
        let f = exact_grid_sample(&prior, &grid, &mut rng).unwrap();
        let obs: Vec<f64> = pts
            .iter()
            .map(|x| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                f.eval(x).unwrap() + 1e-3 * z
            })
            .collect();
        let data = Dataset::new(pts, obs, 1e-6).unwrap();
        if fit_lengthscale(KernelFamily::Rbf, &data, &candidates)
            .unwrap()
            .lengthscale()
            == 0.2
        {
            hits += 1;
        }
    }
    assert!(
        hits >= 40,
        "recovered the true lengthscale in only {hits}/50 runs"
    );
}
