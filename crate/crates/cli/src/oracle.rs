//! Quadrature reference values for the scalar GIG family: CDF and mean of
//! the law with density `∝ x^{λ−1} e^{−αx−β/x}`.
//!
//! The support is cut at points where the mass per unit of `log x`, that
//! is `x` times the kernel, has fallen below `1e-17` of its value at a
//! reference point (the mode, or the mean for a
//! Gamma law whose density blows up at 0). Between consecutive dyadic
//! breakpoints the kernel is integrated by double-exponential quadrature,
//! and CDF queries add one short integral to the cumulative masses.

use mgig_core::distributions::{gig_log_kernel, ScalarLaw};
use quadrature::double_exponential::integrate;

const CUTOFF: f64 = 1e-17;
const TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct GigOracle {
    lambda: f64,
    alpha: f64,
    beta: f64,
    reference: f64,
    log_ref: f64,
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl GigOracle {
    pub fn new(law: &ScalarLaw) -> GigOracle {
        let (lambda, alpha, beta) = law.coefficients();
        let mode = if alpha > 0.0 {
            let l = lambda - 1.0;
            (l + (l * l + 4.0 * alpha * beta).sqrt()) / (2.0 * alpha)
        } else {
            beta / (1.0 - lambda)
        };
        let singular = beta == 0.0 && lambda < 1.0;
        let reference = if mode > 0.0 && !singular { mode } else { lambda / alpha };
        let log_ref = gig_log_kernel(lambda, alpha, beta, reference);
        let g = |x: f64| (gig_log_kernel(lambda, alpha, beta, x) - log_ref).exp() * x / reference;

        let mut hi = reference;
        while g(hi) > CUTOFF && hi < 1e300 {
            hi *= 2.0;
        }
        let mut breaks = vec![];
        let mut lo = reference;
        if singular {
            for _ in 0..60 {
                lo /= 2.0;
            }
            breaks.push(0.0);
        } else {
            while g(lo) > CUTOFF && lo > 1e-300 {
                lo /= 2.0;
            }
        }
        let mut x = lo;
        while x < hi {
            breaks.push(x);
            x *= 2.0;
        }
        breaks.push(hi);

        let mut oracle = GigOracle {
            lambda,
            alpha,
            beta,
            reference,
            log_ref,
            breaks,
            cumulative: vec![],
            total: 0.0,
        };
        let mut acc = 0.0;
        oracle.cumulative.push(0.0);
        for w in oracle.breaks.windows(2) {
            acc += oracle.piece(w[0], w[1], |_| 1.0);
            oracle.cumulative.push(acc);
        }
        oracle.total = acc;
        oracle
    }

    fn kernel(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (gig_log_kernel(self.lambda, self.alpha, self.beta, x) - self.log_ref).exp()
    }

    fn piece(&self, a: f64, b: f64, weight: impl Fn(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        integrate(
            |x| self.kernel(x) * weight(x),
            a,
            b,
            TOLERANCE * (b - a).max(self.reference.min(1.0)),
        )
        .integral
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let first = self.breaks[0];
        let last = *self.breaks.last().unwrap();
        if x <= first {
            return 0.0;
        }
        if x >= last {
            return 1.0;
        }
        let k = self.breaks.partition_point(|&b| b <= x) - 1;
        let mass = self.cumulative[k] + self.piece(self.breaks[k], x, |_| 1.0);
        (mass / self.total).clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self.breaks.windows(2).map(|w| self.piece(w[0], w[1], |x| x)).sum();
        s / self.total
    }
}
