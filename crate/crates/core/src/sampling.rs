//! Posterior sample paths.
//!
//! Two routes are provided. Random Fourier features give an evaluable
//! weight-space approximation for stationary kernels; an exact multivariate
//! normal draw over an explicit grid serves as the reference law for finite
//! domains and for validating the approximate route.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::domain::FiniteGrid;
use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::kernel::{KernelFamily, KernelSpec};

/// Random Fourier feature map `phi(x) = sqrt(2/m) cos(Wx + b)`.
///
/// Frequency rows are drawn from the kernel's spectral density and come in
/// pairs sharing a frequency with phases offset by pi/2; the pair's
/// self-products sum to one by the cosine identity, so `phi(x)'phi(x) = 1`
/// exactly for even `m` and the approximation error is reduced to the
/// frequency-sampling noise alone.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    kernel: KernelSpec,
    frequencies: DMatrix<f64>,
    phases: DVector<f64>,
    scale: f64,
}

impl FeatureMap {
    pub fn num_features(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn frequencies(&self) -> &DMatrix<f64> {
        &self.frequencies
    }

    pub fn phases(&self) -> &DVector<f64> {
        &self.phases
    }

    /// Feature vector at one point.
    pub fn features(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.features_raw(x))
    }

    /// Dot product of one frequency row with `x`, plus the phase.
    fn argument(&self, i: usize, x: &[f64]) -> f64 {
        let mut arg = self.phases[i];
        for (j, &xj) in x.iter().enumerate() {
            arg += self.frequencies[(i, j)] * xj;
        }
        arg
    }

    fn features_raw(&self, x: &[f64]) -> DVector<f64> {
        let m = self.num_features();
        let mut out = DVector::zeros(m);
        let mut i = 0;
        // Adjacent features share a frequency with phases pi/2 apart, so one
        // sin_cos yields both: cos(arg + pi/2) = -sin(arg).
        while i + 1 < m {
            let (s, c) = self.argument(i, x).sin_cos();
            out[i] = self.scale * c;
            out[i + 1] = -self.scale * s;
            i += 2;
        }
        if i < m {
            out[i] = self.scale * self.argument(i, x).cos();
        }
        out
    }

    /// Weighted feature sum `phi(x)' w` without materializing `phi(x)`.
    pub fn eval_weights(&self, x: &[f64], weights: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let m = self.num_features();
        let mut acc = 0.0;
        let mut i = 0;
        while i + 1 < m {
            let (s, c) = self.argument(i, x).sin_cos();
            acc += weights[i] * c - weights[i + 1] * s;
            i += 2;
        }
        if i < m {
            acc += weights[i] * self.argument(i, x).cos();
        }
        Ok(self.scale * acc)
    }

    /// Feature matrix with one row per point.
    pub fn feature_matrix(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let m = self.num_features();
        let mut phi = DMatrix::zeros(points.len(), m);
        for (r, x) in points.iter().enumerate() {
            let row = self.features(x)?;
            phi.row_mut(r).copy_from(&row.transpose());
        }
        Ok(phi)
    }

    /// Approximate kernel `phi(x)'phi(x')` implied by the map.
    pub fn implied_kernel(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        Ok(self.features(x)?.dot(&self.features(xp)?))
    }
}

/// Builds a feature map for an RBF or Matérn kernel.
///
/// RBF frequencies are `N(0, I/l^2)`; Matérn-nu frequencies are multivariate
/// Student-t with `2 nu` degrees of freedom scaled by `1/l`, drawn by
/// Gaussian/chi-square compounding. The linear kernel has no spectral
/// density; use the exact grid sampler instead.
pub fn build_rff<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    dim: usize,
    num_features: usize,
    rng: &mut R,
) -> Result<FeatureMap> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "must be >= 1".into(),
        });
    }
    if num_features == 0 {
        return Err(Error::InvalidParameter {
            name: "num_features",
            reason: "must be >= 1".into(),
        });
    }
    let draw_frequency = |rng: &mut R| -> Result<Vec<f64>> {
        match kernel.family() {
            KernelFamily::Rbf => Ok((0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) / kernel.lengthscale())
                .collect()),
            KernelFamily::Matern { nu } => {
                let chi = ChiSquared::new(2.0 * nu).expect("2 nu > 0");
                let s: f64 = chi.sample(rng);
                let factor = (2.0 * nu / s).sqrt() / kernel.lengthscale();
                Ok((0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * factor)
                    .collect())
            }
            KernelFamily::Linear => Err(Error::UnsupportedKernel {
                kernel: "linear",
                operation: "random Fourier features",
            }),
        }
    };

    let two_pi = 2.0 * std::f64::consts::PI;
    let mut frequencies = DMatrix::zeros(num_features, dim);
    let mut phases = DVector::zeros(num_features);
    let mut i = 0;
    while i < num_features {
        let w = draw_frequency(rng)?;
        let b: f64 = rng.random::<f64>() * two_pi;
        for (j, &wj) in w.iter().enumerate() {
            frequencies[(i, j)] = wj;
        }
        phases[i] = b;
        if i + 1 < num_features {
            for (j, &wj) in w.iter().enumerate() {
                frequencies[(i + 1, j)] = wj;
            }
            phases[i + 1] = (b + std::f64::consts::FRAC_PI_2) % two_pi;
        }
        i += 2;
    }
    Ok(FeatureMap {
        kernel: *kernel,
        frequencies,
        phases,
        scale: (2.0 / num_features as f64).sqrt(),
    })
}

/// An evaluable draw from the posterior: either a weight-space RFF form that
/// can be queried anywhere, or an exact finite-grid value vector.
#[derive(Debug, Clone)]
pub enum SamplePath {
    Rff {
        map: FeatureMap,
        weights: DVector<f64>,
    },
    Grid {
        grid: FiniteGrid,
        values: Vec<f64>,
    },
}

impl SamplePath {
    /// Evaluates the path. Grid-form paths can only be queried at points that
    /// are bitwise members of their grid.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            SamplePath::Rff { map, weights } => map.eval_weights(x, weights),
            SamplePath::Grid { grid, values } => grid
                .index_of(x)
                .map(|i| values[i])
                .ok_or(Error::OffGridQuery),
        }
    }

    /// Evaluates the path at every point of `grid`, in index order.
    pub fn eval_on(&self, grid: &FiniteGrid) -> Result<Vec<f64>> {
        match self {
            SamplePath::Rff { .. } => grid.iter().map(|x| self.eval(x)).collect(),
            SamplePath::Grid { grid: own, values } => {
                if own == grid {
                    Ok(values.clone())
                } else {
                    grid.iter().map(|x| self.eval(x)).collect()
                }
            }
        }
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        match self {
            SamplePath::Rff { weights, .. } => Some(weights),
            SamplePath::Grid { .. } => None,
        }
    }
}

/// Draws weight-space posterior samples for a feature map.
///
/// The weight posterior is `N(A^-1 Phi' y, sigma^2 A^-1)` with
/// `A = Phi'Phi + sigma^2 I`. The draw uses the function-space update
/// `w = w0 + Phi'(Phi Phi' + sigma^2 I)^-1 (y - Phi w0 - eps0)`, which has
/// the same law (push-through identity) but factorizes an n x n matrix
/// instead of an m x m one.
pub fn draw_posterior_sample<R: Rng + ?Sized>(
    post: &GpPosterior,
    map: &FeatureMap,
    rng: &mut R,
) -> Result<SamplePath> {
    if let Some(d) = post.data().dim() {
        if d != map.dim() {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: map.dim(),
            });
        }
    }
    let m = map.num_features();
    let w0 = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = post.len();
    if n == 0 {
        return Ok(SamplePath::Rff {
            map: map.clone(),
            weights: w0,
        });
    }
    let noise_std = post.noise_var().sqrt();
    let phi = map.feature_matrix(post.data().inputs())?;
    let eps0 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * noise_std);
    let y = DVector::from_column_slice(post.data().observations());
    let rhs = y - &phi * &w0 - eps0;
    let mut gram = &phi * phi.transpose();
    for i in 0..n {
        gram[(i, i)] += post.noise_var();
    }
    let chol = Cholesky::new(gram).ok_or(Error::FactorizationFailed {
        context: "feature gram matrix",
    })?;
    let v = chol.solve(&rhs);
    let weights = w0 + phi.transpose() * v;
    Ok(SamplePath::Rff {
        map: map.clone(),
        weights,
    })
}

/// Exact posterior sampler over a fixed grid with the factorization cached,
/// for Monte-Carlo loops that draw many paths from one posterior.
#[derive(Debug, Clone)]
pub struct GridSampler {
    grid: FiniteGrid,
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
}

const GRID_JITTER: f64 = 1e-10;

impl GridSampler {
    pub fn new(post: &GpPosterior, grid: &FiniteGrid) -> Result<Self> {
        if let Some(d) = post.data().dim() {
            if d != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: grid.dim(),
                });
            }
        }
        let g = grid.len();
        let kernel = post.kernel();
        let mut cov = DMatrix::from_fn(g, g, |i, j| kernel.eval_raw(grid.point(i), grid.point(j)));
        let mut mean = DVector::zeros(g);
        if !post.is_empty() {
            let n = post.len();
            let inputs = post.data().inputs();
            let cross = DMatrix::from_fn(n, g, |i, j| kernel.eval_raw(&inputs[i], grid.point(j)));
            let l = post.chol_lower().expect("non-empty posterior has a factor");
            let v = l
                .solve_lower_triangular(&cross)
                .ok_or(Error::FactorizationFailed {
                    context: "posterior cross-covariance",
                })?;
            cov -= v.transpose() * &v;
            mean = cross.transpose() * post.alpha();
        }
        for i in 0..g {
            cov[(i, i)] += GRID_JITTER;
        }
        let chol = Cholesky::new(cov).ok_or(Error::FactorizationFailed {
            context: "grid covariance after jitter; grid too collinear",
        })?;
        Ok(Self {
            grid: grid.clone(),
            mean,
            chol_l: chol.unpack(),
        })
    }

    pub fn draw_values<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let g = self.grid.len();
        let z = DVector::from_fn(g, |_, _| rng.sample::<f64, _>(StandardNormal));
        let vals = &self.mean + &self.chol_l * z;
        vals.iter().copied().collect()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        SamplePath::Grid {
            grid: self.grid.clone(),
            values: self.draw_values(rng),
        }
    }

    pub fn grid(&self) -> &FiniteGrid {
        &self.grid
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
}

/// One exact multivariate normal draw of the posterior restricted to `grid`.
pub fn exact_grid_sample<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &FiniteGrid,
    rng: &mut R,
) -> Result<SamplePath> {
    Ok(GridSampler::new(post, grid)?.draw(rng))
}
