//! The GIG family on `(0, ∞)` closed under its boundary cases: a zero
//! `1/x` coefficient gives a Gamma law and a zero `x` coefficient gives an
//! inverse Gamma law.

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::distributions::{gig_log_kernel, GammaParams, GigParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ScalarLaw {
    Gig(GigParams),
    Gamma(GammaParams),
    /// Law of `1/G` for `G ~ Gamma(shape, rate)`.
    InverseGamma(GammaParams),
}

impl ScalarLaw {
    /// The law with density `∝ x^{λ−1} e^{−αx−β/x}`, including the
    /// boundary cases where the density is integrable.
    pub fn from_coefficients(lambda: f64, alpha: f64, beta: f64) -> Result<ScalarLaw> {
        if alpha > 0.0 && beta > 0.0 {
            return Ok(ScalarLaw::Gig(GigParams::new(lambda, alpha, beta)?));
        }
        if beta == 0.0 && alpha > 0.0 && lambda > 0.0 {
            return Ok(ScalarLaw::Gamma(GammaParams::new(lambda, alpha)?));
        }
        if alpha == 0.0 && beta > 0.0 && lambda < 0.0 {
            return Ok(ScalarLaw::InverseGamma(GammaParams::new(-lambda, beta)?));
        }
        Err(Error::InvalidParams("GIG coefficients do not give a probability law"))
    }

    /// `(λ, α, β)` of the density `x^{λ−1} e^{−αx−β/x}`.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        match *self {
            ScalarLaw::Gig(p) => (p.lambda, p.alpha, p.beta),
            ScalarLaw::Gamma(g) => (g.shape, g.rate, 0.0),
            ScalarLaw::InverseGamma(g) => (-g.shape, 0.0, g.rate),
        }
    }

    pub fn log_kernel(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain("density needs x > 0"));
        }
        let (l, a, b) = self.coefficients();
        Ok(gig_log_kernel(l, a, b, x))
    }
}

impl Distribution<f64> for ScalarLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarLaw::Gig(p) => p.sample(rng),
            ScalarLaw::Gamma(g) => g.sample(rng),
            ScalarLaw::InverseGamma(g) => 1.0 / g.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_cases() {
        assert!(matches!(
            ScalarLaw::from_coefficients(1.0, 2.0, 3.0),
            Ok(ScalarLaw::Gig(_))
        ));
        let g = ScalarLaw::from_coefficients(1.5, 2.0, 0.0).unwrap();
        assert_eq!(g, ScalarLaw::Gamma(GammaParams::new(1.5, 2.0).unwrap()));
        let ig = ScalarLaw::from_coefficients(-1.5, 0.0, 2.0).unwrap();
        assert_eq!(ig.coefficients(), (-1.5, 0.0, 2.0));
        assert!(ScalarLaw::from_coefficients(-1.0, 2.0, 0.0).is_err());
        assert!(ScalarLaw::from_coefficients(1.0, 0.0, 0.0).is_err());
        assert_eq!(g.log_kernel(1.0).unwrap(), -2.0);
    }
}
