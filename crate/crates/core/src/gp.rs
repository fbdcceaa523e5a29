//! GP posterior inference with a zero-mean prior.
//!
//! The posterior over `f` given observations `y_i = f(x_i) + eps_i`,
//! `eps_i ~ N(0, sigma^2)`, has the closed forms
//!
//! ```text
//! mu(x)      = k(x)' (K + sigma^2 I)^-1 y
//! sigma^2(x) = k(x, x) - k(x)' (K + sigma^2 I)^-1 k(x)
//! ```
//!
//! The noise variance doubles as the jitter: no extra diagonal regularization
//! is added, so `sigma^2 > 0` is required.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};

/// Noisy observations at a set of input points.
#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    observations: Vec<f64>,
    noise_var: f64,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, observations: Vec<f64>, noise_var: f64) -> Result<Self> {
        if inputs.len() != observations.len() {
            return Err(Error::LengthMismatch {
                context: "inputs vs observations",
            });
        }
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise_var",
                reason: format!("must be finite and positive, got {noise_var}"),
            });
        }
        if let Some(first) = inputs.first() {
            let d = first.len();
            for x in &inputs {
                if x.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: x.len(),
                    });
                }
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: "dataset input",
                    });
                }
            }
        }
        if !observations.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dataset observation",
            });
        }
        Ok(Self {
            inputs,
            observations,
            noise_var,
        })
    }

    pub fn empty(noise_var: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), noise_var)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Input dimension, or `None` for an empty dataset.
    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Appends one observation, validating the dimension.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        if !x.iter().all(|v| v.is_finite()) || !y.is_finite() {
            return Err(Error::NonFinite {
                context: "pushed observation",
            });
        }
        self.inputs.push(x);
        self.observations.push(y);
        Ok(())
    }
}

/// Immutable fitted posterior holding the Cholesky factor of `K + sigma^2 I`
/// and the weight vector `alpha = (K + sigma^2 I)^-1 y`.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kernel: KernelSpec,
    data: Dataset,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

impl GpPosterior {
    /// Fits the posterior. The factorization failing signals a Gram matrix
    /// that is ill-conditioned even after the noise jitter.
    pub fn fit(kernel: KernelSpec, data: Dataset) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Ok(Self {
                kernel,
                data,
                chol: None,
                alpha: DVector::zeros(0),
            });
        }
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let mut v = kernel.eval_raw(&data.inputs[i], &data.inputs[j]);
            if i == j {
                v += data.noise_var;
            }
            v
        });
        let chol = Cholesky::new(gram).ok_or(Error::FactorizationFailed {
            context: "gram matrix with noise jitter",
        })?;
        let y = DVector::from_column_slice(&data.observations);
        let alpha = chol.solve(&y);
        Ok(Self {
            kernel,
            data,
            chol: Some(chol),
            alpha,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn noise_var(&self) -> f64 {
        self.data.noise_var
    }

    /// Number of observations conditioned on.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Lower-triangular Cholesky factor of `K + sigma^2 I`, or `None` when
    /// the dataset is empty.
    pub fn chol_lower(&self) -> Option<DMatrix<f64>> {
        self.chol.as_ref().map(|c| c.l())
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Posterior mean and variance at a query point.
    ///
    /// The variance is clamped at zero; any clamp beyond 1e-12 would indicate
    /// a genuine bug rather than floating-point dust, so it is asserted in
    /// debug builds.
    pub fn mean_var(&self, x: &[f64]) -> Result<(f64, f64)> {
        if let Some(d) = self.data.dim() {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "query point",
            });
        }
        Ok(self.mean_var_raw(x))
    }

    pub(crate) fn mean_var_raw(&self, x: &[f64]) -> (f64, f64) {
        let kxx = self.kernel.eval_raw(x, x);
        let Some(chol) = self.chol.as_ref() else {
            return (0.0, kxx);
        };
        let n = self.data.len();
        let kvec = DVector::from_fn(n, |i, _| self.kernel.eval_raw(x, &self.data.inputs[i]));
        let mean = kvec.dot(&self.alpha);
        // v = L^-1 k ensures the quadratic form is computed as a sum of
        // squares, so the subtraction is the only cancellation point.
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&kvec)
            .expect("Cholesky factor has positive diagonal");
        let var = kxx - v.norm_squared();
        debug_assert!(
            var > -1e-12,
            "posterior variance clamp exceeded 1e-12: {var}"
        );
        (mean, var.max(0.0))
    }

    /// Posterior mean and standard deviation at every point of a slice of
    /// points, in order.
    pub fn mean_std_many(&self, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut means = Vec::with_capacity(points.len());
        let mut stds = Vec::with_capacity(points.len());
        for x in points {
            let (m, v) = self.mean_var(x)?;
            means.push(m);
            stds.push(v.sqrt());
        }
        Ok((means, stds))
    }
}

/// Log marginal likelihood of the data under the zero-mean GP prior:
/// `-1/2 y'(K + sigma^2 I)^-1 y - 1/2 log det(K + sigma^2 I) - n/2 log 2pi`.
pub fn log_marginal_likelihood(kernel: &KernelSpec, data: &Dataset) -> Result<f64> {
    let n = data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let post = GpPosterior::fit(*kernel, data.clone())?;
    let chol = post.chol.as_ref().expect("non-empty fit has a factor");
    let y = DVector::from_column_slice(data.observations());
    let quad = y.dot(&post.alpha);
    let logdet: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    Ok(-0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Grid search over candidate lengthscales by marginal likelihood.
/// Ties break toward the smallest candidate.
pub fn fit_lengthscale(
    family: KernelFamily,
    data: &Dataset,
    candidates: &[f64],
) -> Result<KernelSpec> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| {
        a.partial_cmp(b)
            .expect("candidate lengthscales must be comparable")
    });
    let mut best: Option<(f64, KernelSpec)> = None;
    for &ell in &sorted {
        let kernel = match family {
            KernelFamily::Rbf => KernelSpec::rbf(ell)?,
            KernelFamily::Matern { nu } => KernelSpec::matern(nu, ell)?,
            KernelFamily::Linear => KernelSpec::linear(),
        };
        let lml = log_marginal_likelihood(&kernel, data)?;
        match &best {
            Some((best_lml, _)) if lml <= *best_lml => {}
            _ => best = Some((lml, kernel)),
        }
    }
    Ok(best.expect("non-empty candidate list").1)
}

/// Lower bound on the posterior variance after `n_t` observations:
/// `sigma^2 / (sigma^2 + n_t)`, attained when all observations sit at the
/// query point.
pub fn posterior_var_floor(noise_var: f64, n_t: usize) -> f64 {
    noise_var / (noise_var + n_t as f64)
}
