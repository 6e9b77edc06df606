//! Scalar generalized inverse Gaussian law, density `∝ x^{λ−1} e^{−αx−β/x}`.
//!
//! Sampling follows Hörmann & Leydold (2014): the law is reduced to the
//! one-parameter family `x^{λ−1} e^{−ω(x+1/x)/2}` with `ω = 2√(αβ)` and
//! rescaled by `η = √(β/α)`; negative `λ` is handled through `1/X`.
//! Three generators cover the parameter plane: ratio-of-uniforms with mode
//! shift (the main workhorse), ratio-of-uniforms without shift, and a
//! dedicated rejection sampler for the non-log-concave corner
//! `0 ≤ λ < 1, ω small`.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GigParams {
    pub lambda: f64,
    /// Coefficient of `x` in the exponent.
    pub alpha: f64,
    /// Coefficient of `1/x` in the exponent.
    pub beta: f64,
}

impl GigParams {
    pub fn new(lambda: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParams("GIG lambda must be finite"));
        }
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParams("GIG requires alpha > 0 and beta > 0"));
        }
        Ok(GigParams { lambda, alpha, beta })
    }

    /// Law of `1/X`: `GIG(−λ, β, α)`.
    pub fn reciprocal(&self) -> GigParams {
        GigParams {
            lambda: -self.lambda,
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    pub fn logpdf_unnorm(&self, x: f64) -> Result<f64> {
        gig_logpdf_unnorm(self, x)
    }
}

/// `(λ−1) log x − αx − β/x` for `x > 0`.
pub fn gig_logpdf_unnorm(p: &GigParams, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("GIG density needs x > 0"));
    }
    Ok(gig_log_kernel(p.lambda, p.alpha, p.beta, x))
}

/// The same kernel without parameter validation, so that degenerate
/// coefficients (`α = 0` or `β = 0`, the gamma and inverse-gamma limits)
/// can appear in density identities.
pub fn gig_log_kernel(lambda: f64, alpha: f64, beta: f64, x: f64) -> f64 {
    let mut v = (lambda - 1.0) * x.ln();
    if alpha != 0.0 {
        v -= alpha * x;
    }
    if beta != 0.0 {
        v -= beta / x;
    }
    v
}

pub fn gig_sample<R: Rng + ?Sized>(p: &GigParams, rng: &mut R) -> f64 {
    p.sample(rng)
}

impl Distribution<f64> for GigParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lambda = self.lambda.abs();
        let eta = (self.beta / self.alpha).sqrt();
        let omega = 2.0 * (self.alpha * self.beta).sqrt();
        let y = if lambda > 2.0 || omega > 3.0 {
            rou_shifted(lambda, omega, rng)
        } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
            rou_plain(lambda, omega, rng)
        } else {
            concave_corner(lambda, omega, rng)
        };
        if self.lambda < 0.0 {
            eta / y
        } else {
            eta * y
        }
    }
}

/// Mode of `x^{λ−1} e^{−ω(x+1/x)/2}`.
fn standard_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]: keeps logarithms finite.
    1.0 - rng.random::<f64>()
}

fn rou_plain<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = standard_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * uniform(rng);
        let v = uniform(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn rou_shifted<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = standard_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // Extremes of (x − xm)·√f(x): roots of a depressed cubic.
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v = uniform(rng);
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a three-piece hat; valid for `0 ≤ λ < 1`.
fn concave_corner<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = standard_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let start = if x0 > 2.0 / omega { x0 } else { 2.0 / omega };
                x = -2.0 / omega * ((-omega / 2.0 * start).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        if !(x > 0.0) || !x.is_finite() {
            continue;
        }
        let u = rng.random::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}
