//! Standard normal density, CDF, and survival function.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / SQRT_2)
}

/// Survival function `1 - Phi(x)` computed without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erf::erfc(x / SQRT_2)
}
