//! Shared fixtures for the criterion benchmarks.

use gpbo::{derive_rng, exact_grid_sample, Dataset, FiniteGrid, GpPosterior, KernelSpec};
use rand::Rng;

/// Posterior with `n` observations of a smooth draw on `[0, 1]^2`.
pub fn fitted_posterior(n: usize, noise_var: f64) -> GpPosterior {
    let kernel = KernelSpec::rbf(0.2).unwrap();
    let mut rng = derive_rng(0xBE, &[n as u64]);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
    let observations = if n == 0 {
        Vec::new()
    } else {
        let prior = GpPosterior::fit(kernel, Dataset::empty(1.0).unwrap()).unwrap();
        let grid = FiniteGrid::new(inputs.clone()).unwrap();
        let f = exact_grid_sample(&prior, &grid, &mut rng).unwrap();
        inputs.iter().map(|x| f.eval(x).unwrap()).collect()
    };
    GpPosterior::fit(
        kernel,
        Dataset::new(inputs, observations, noise_var).unwrap(),
    )
    .unwrap()
}

pub fn bench_grid() -> FiniteGrid {
    FiniteGrid::lattice(2, 15, 1.0).unwrap()
}
