#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gamma law in the rate parametrization, density `∝ x^{λ−1} e^{−γx}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParams("Gamma requires shape > 0 and rate > 0"));
        }
        Ok(GammaParams { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn logpdf_unnorm(&self, x: f64) -> Result<f64> {
        gamma_logpdf_unnorm(self, x)
    }
}

pub fn gamma_logpdf_unnorm(p: &GammaParams, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("Gamma density needs x > 0"));
    }
    Ok((p.shape - 1.0) * x.ln() - p.rate * x)
}

pub fn gamma_sample<R: Rng + ?Sized>(p: &GammaParams, rng: &mut R) -> f64 {
    p.sample(rng)
}

impl Distribution<f64> for GammaParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated parameters")
            .sample(rng)
    }
}
