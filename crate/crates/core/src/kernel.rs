//! Kernel functions with unit output scale.

use crate::error::{Error, Result};

/// Kernel family. Matérn is restricted to the half-integer orders that have
/// closed-form expressions, which avoids a Bessel-function dependency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Rbf,
    Matern { nu: f64 },
    Linear,
}

/// A kernel with fixed unit output scale: `k(x, x) = 1` for RBF and Matérn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
}

impl KernelSpec {
    pub fn rbf(lengthscale: f64) -> Result<Self> {
        check_lengthscale(lengthscale)?;
        Ok(Self {
            family: KernelFamily::Rbf,
            lengthscale,
        })
    }

    /// Matérn-ν kernel. Only ν ∈ {1.5, 2.5} is accepted.
    pub fn matern(nu: f64, lengthscale: f64) -> Result<Self> {
        check_lengthscale(lengthscale)?;
        if nu != 1.5 && nu != 2.5 {
            return Err(Error::InvalidParameter {
                name: "nu",
                reason: format!("must be 1.5 or 2.5, got {nu}"),
            });
        }
        Ok(Self {
            family: KernelFamily::Matern { nu },
            lengthscale,
        })
    }

    /// Linear kernel `k(x, x') = x . x'`. The lengthscale is unused.
    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            lengthscale: 1.0,
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Returns a copy with a different lengthscale, keeping the family.
    pub fn with_lengthscale(&self, lengthscale: f64) -> Result<Self> {
        check_lengthscale(lengthscale)?;
        Ok(Self {
            family: self.family,
            lengthscale,
        })
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self.family, KernelFamily::Linear)
    }

    /// Evaluates `k(x, x')`, validating dimensions and finiteness.
    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        if x.len() != xp.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: xp.len(),
            });
        }
        if !(x.iter().all(|v| v.is_finite()) && xp.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite {
                context: "kernel input point",
            });
        }
        Ok(self.eval_raw(x, xp))
    }

    /// Evaluation without input validation, for inner loops over known-good
    /// points.
    pub(crate) fn eval_raw(&self, x: &[f64], xp: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Rbf => {
                let sq: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * self.lengthscale * self.lengthscale)).exp()
            }
            KernelFamily::Matern { nu } => {
                let sq: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
                let r = sq.sqrt() / self.lengthscale;
                if nu == 1.5 {
                    let s = 3.0_f64.sqrt() * r;
                    (1.0 + s) * (-s).exp()
                } else {
                    let s = 5.0_f64.sqrt() * r;
                    (1.0 + s + s * s / 3.0) * (-s).exp()
                }
            }
            KernelFamily::Linear => x.iter().zip(xp).map(|(a, b)| a * b).sum(),
        }
    }

    /// Lipschitz constant of the posterior standard deviation with respect to
    /// the L1 norm, valid for any dataset and positive noise variance.
    pub fn lipschitz_sigma(&self) -> f64 {
        match self.family {
            KernelFamily::Linear => 1.0,
            KernelFamily::Rbf => 2.0_f64.sqrt() / self.lengthscale,
            KernelFamily::Matern { nu } => {
                (2.0_f64.sqrt() / self.lengthscale) * (nu / (nu - 1.0)).sqrt()
            }
        }
    }
}

fn check_lengthscale(lengthscale: f64) -> Result<()> {
    if !(lengthscale.is_finite() && lengthscale > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lengthscale",
            reason: format!("must be finite and positive, got {lengthscale}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_identity_is_one() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let x = [0.3, -0.7];
        assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert!((v - (-0.5_f64).exp()).abs() < 1e-15);
        assert!((v - 0.6065306597126334).abs() < 1e-12);
    }

    #[test]
    fn linear_orthogonal_is_zero() {
        let k = KernelSpec::linear();
        assert_eq!(k.eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn matern_identity_and_symmetry() {
        for nu in [1.5, 2.5] {
            let k = KernelSpec::matern(nu, 0.4).unwrap();
            let x = [0.1, 0.9];
            let y = [0.8, 0.2];
            assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
            assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
        }
    }

    #[test]
    fn matern_rejects_unsupported_orders() {
        assert!(KernelSpec::matern(0.5, 1.0).is_err());
        assert!(KernelSpec::matern(1.0, 1.0).is_err());
        assert!(KernelSpec::matern(3.5, 1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(matches!(
            k.eval(&[0.0, 1.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(k.eval(&[f64::NAN], &[0.0]).is_err());
        assert!(k.eval(&[0.0], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(KernelSpec::linear().lipschitz_sigma(), 1.0);
        let rbf = KernelSpec::rbf(1.0).unwrap();
        assert!((rbf.lipschitz_sigma() - 2.0_f64.sqrt()).abs() < 1e-15);
        let m = KernelSpec::matern(2.5, 1.0).unwrap();
        assert!((m.lipschitz_sigma() - (10.0_f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((m.lipschitz_sigma() - 1.8257418583505538).abs() < 1e-12);
    }

    #[test]
    fn stationarity_depends_only_on_difference() {
        let k = KernelSpec::rbf(0.3).unwrap();
        let a = k.eval(&[0.1, 0.2], &[0.4, 0.6]).unwrap();
        let b = k.eval(&[0.5, 0.1], &[0.8, 0.5]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
