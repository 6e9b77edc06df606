//! Wishart law `W(λ, c)` with density `∝ (det x)^{λ−(r+1)/2} e^{−⟨c,x⟩}`.
//!
//! In the usual `(n, Σ)` parametrization this is the standard Wishart with
//! `n = 2λ` degrees of freedom and scale `Σ = (2c)⁻¹`, so `E[X] = λ c⁻¹`.
//! Draws use the Bartlett decomposition. For half-integer
//! `λ ≤ (r−1)/2` the law lives on the boundary of the cone; those draws are
//! returned as [`WishartDraw::Closure`].

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::distributions::gamma::GammaParams;
use crate::error::{Error, Result};
use crate::spd::{SpdMatrix, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct WishartParams {
    pub lambda: f64,
    pub scale: SpdMatrix,
    /// Cholesky factor of `Σ = (2c)⁻¹`.
    sigma_factor: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WishartDraw {
    Interior(SpdMatrix),
    /// Rank-deficient draw on the boundary of the cone.
    Closure(SymMatrix),
}

impl WishartDraw {
    pub fn is_closure_valued(&self) -> bool {
        matches!(self, WishartDraw::Closure(_))
    }

    pub fn matrix(&self) -> &SymMatrix {
        match self {
            WishartDraw::Interior(m) => m.base(),
            WishartDraw::Closure(m) => m,
        }
    }

    pub fn into_spd(self) -> Option<SpdMatrix> {
        match self {
            WishartDraw::Interior(m) => Some(m),
            WishartDraw::Closure(_) => None,
        }
    }
}

/// Membership in `{0, 1/2, …, (r−1)/2} ∪ ((r−1)/2, ∞)`.
pub fn in_gindikin_set(lambda: f64, dim: usize) -> bool {
    let edge = (dim as f64 - 1.0) / 2.0;
    if !lambda.is_finite() || lambda < 0.0 {
        return false;
    }
    if lambda > edge {
        return true;
    }
    let twice = 2.0 * lambda;
    twice == twice.round()
}

impl WishartParams {
    pub fn new(lambda: f64, scale: SpdMatrix) -> Result<Self> {
        let dim = scale.dim();
        if !in_gindikin_set(lambda, dim) {
            return Err(Error::InvalidLambda { lambda, dim });
        }
        let sigma = scale.inverse()?.base().scaled(0.5);
        let sigma_factor = SpdMatrix::new(sigma)?.factor().clone();
        Ok(WishartParams {
            lambda,
            scale,
            sigma_factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    /// `λ > (r−1)/2`: the law has a density on the open cone.
    pub fn has_density(&self) -> bool {
        self.lambda > (self.dim() as f64 - 1.0) / 2.0
    }

    pub fn degrees_of_freedom(&self) -> f64 {
        2.0 * self.lambda
    }

    /// `λ c⁻¹`.
    pub fn mean(&self) -> Result<SymMatrix> {
        Ok(self.scale.inverse()?.base().scaled(self.lambda))
    }

    pub fn logpdf_unnorm(&self, x: &SpdMatrix) -> Result<f64> {
        if !self.has_density() {
            return Err(Error::Domain("singular Wishart law has no density"));
        }
        let zero = SymMatrix::zeros(self.dim());
        crate::distributions::mgig::mgig_log_kernel(self.lambda, self.scale.base(), &zero, x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WishartDraw {
        if self.has_density() {
            WishartDraw::Interior(self.sample_bartlett(rng))
        } else {
            WishartDraw::Closure(self.sample_singular(rng))
        }
    }

    fn sample_bartlett<R: Rng + ?Sized>(&self, rng: &mut R) -> SpdMatrix {
        let r = self.dim();
        let n = self.degrees_of_freedom();
        let mut a = DMatrix::<f64>::zeros(r, r);
        for i in 0..r {
            // chi-square(n − i) = Gamma(shape (n − i)/2, rate 1/2)
            let chi2 = GammaParams::new((n - i as f64) / 2.0, 0.5)
                .expect("density regime keeps n − i > 0")
                .sample(rng);
            a[(i, i)] = chi2.sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let factor = &self.sigma_factor * a;
        SpdMatrix::from_cholesky_factor(factor).expect("Bartlett factor has a positive diagonal")
    }

    fn sample_singular<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        let r = self.dim();
        let k = self.degrees_of_freedom().round() as usize;
        let mut acc = DMatrix::<f64>::zeros(r, r);
        for _ in 0..k {
            let e: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
            let z = &self.sigma_factor * DVector::from_vec(e);
            acc += &z * z.transpose();
        }
        SymMatrix::from_lower_fn(r, |i, j| acc[(i, j)])
    }
}

pub fn wishart_sample<R: Rng + ?Sized>(p: &WishartParams, rng: &mut R) -> WishartDraw {
    p.sample(rng)
}

/// Draws from `W(λ, c)` until one has condition number at most
/// `max_condition`. Used to generate well-conditioned test inputs.
pub fn sample_conditioned<R: Rng + ?Sized>(p: &WishartParams, max_condition: f64, rng: &mut R) -> Result<SpdMatrix> {
    if !p.has_density() {
        return Err(Error::Domain("conditioned draws need the density regime"));
    }
    loop {
        if let WishartDraw::Interior(m) = p.sample(rng) {
            if m.condition_number() <= max_condition {
                return Ok(m);
            }
        }
    }
}

/// Random SPD test input: `W(λ = r, c = I)` filtered to `κ ≤ max_condition`.
pub fn random_spd<R: Rng + ?Sized>(dim: usize, max_condition: f64, rng: &mut R) -> SpdMatrix {
    let p = WishartParams::new(dim as f64, SpdMatrix::identity(dim)).expect("λ = r is admissible");
    sample_conditioned(&p, max_condition, rng).expect("density regime")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;
    use crate::numerics::{mean, variance};
    use crate::spd::is_spd;

    #[test]
    fn gindikin_set() {
        assert!(in_gindikin_set(0.0, 3));
        assert!(in_gindikin_set(0.5, 3));
        assert!(in_gindikin_set(1.0, 3));
        assert!(!in_gindikin_set(0.7, 3));
        assert!(in_gindikin_set(1.01, 3));
        assert!(!in_gindikin_set(-0.5, 3));
        assert!(matches!(
            WishartParams::new(0.3, SpdMatrix::identity(2)),
            Err(Error::InvalidLambda { .. })
        ));
    }

    #[test]
    fn scalar_case_is_gamma() {
        let c = 2.5;
        let p = WishartParams::new(1.7, SpdMatrix::from_diag(&[c]).unwrap()).unwrap();
        let mut rng = RngStream::new(9, 1).rng();
        let xs: Vec<f64> = (0..50_000).map(|_| p.sample(&mut rng).matrix().get(0, 0)).collect();
        let m = mean(&xs);
        let se = (variance(&xs) / xs.len() as f64).sqrt();
        assert!((m - 1.7 / c).abs() < 3.0 * se, "mean {m}");
    }

    #[test]
    fn mean_is_lambda_c_inverse() {
        let p = WishartParams::new(3.0, SpdMatrix::identity(2)).unwrap();
        let mut rng = RngStream::new(21, 0).rng();
        let n = 40_000;
        let draws: Vec<SymMatrix> = (0..n).map(|_| p.sample(&mut rng).matrix().clone()).collect();
        let expected = p.mean().unwrap();
        for (i, j) in [(0, 0), (1, 0), (1, 1)] {
            let xs: Vec<f64> = draws.iter().map(|d| d.get(i, j)).collect();
            let se = (variance(&xs) / n as f64).sqrt();
            assert!((mean(&xs) - expected.get(i, j)).abs() < 3.0 * se, "entry ({i},{j})");
        }
    }

    #[test]
    fn boundary_lambda_is_closure_valued() {
        let p = WishartParams::new(0.5, SpdMatrix::identity(2)).unwrap();
        assert!(!p.has_density());
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..20 {
            let d = p.sample(&mut rng);
            assert!(d.is_closure_valued());
            assert!(!is_spd(d.matrix()));
        }
        let zero = WishartParams::new(0.0, SpdMatrix::identity(3)).unwrap();
        assert_eq!(zero.sample(&mut rng).matrix(), &SymMatrix::zeros(3));
        assert!(p.logpdf_unnorm(&SpdMatrix::identity(2)).is_err());
    }

    #[test]
    fn random_spd_respects_condition_filter() {
        let mut rng = RngStream::new(4, 0).rng();
        for dim in [1, 2, 5] {
            for _ in 0..50 {
                let m = random_spd(dim, 1e4, &mut rng);
                assert!(m.condition_number() <= 1e4);
            }
        }
    }
}
