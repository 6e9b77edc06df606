use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spd::{check_dims, trace_inner, SpdMatrix, SymMatrix};

/// Matrix GIG law on the SPD cone,
/// density `∝ (det x)^{λ−(r+1)/2} e^{−⟨a,x⟩−⟨b,x⁻¹⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MgigParams {
    pub lambda: f64,
    pub a: SpdMatrix,
    pub b: SpdMatrix,
}

/// Serializable view of [`MgigParams`] (packed lower triangles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgigParamsRecord {
    pub dim: usize,
    pub lambda: f64,
    pub a: SymMatrix,
    pub b: SymMatrix,
}

impl MgigParams {
    pub fn new(lambda: f64, a: SpdMatrix, b: SpdMatrix) -> Result<Self> {
        check_dims(a.dim(), b.dim())?;
        if !lambda.is_finite() {
            return Err(crate::Error::InvalidParams("MGIG lambda must be finite"));
        }
        Ok(MgigParams { lambda, a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn logpdf_unnorm(&self, x: &SpdMatrix) -> Result<f64> {
        mgig_logpdf_unnorm(self, x)
    }

    pub fn record(&self) -> MgigParamsRecord {
        MgigParamsRecord {
            dim: self.dim(),
            lambda: self.lambda,
            a: self.a.base().clone(),
            b: self.b.base().clone(),
        }
    }
}

/// `(λ − (r+1)/2)·logdet x − ⟨a, x⟩ − ⟨b, x⁻¹⟩`.
pub fn mgig_logpdf_unnorm(p: &MgigParams, x: &SpdMatrix) -> Result<f64> {
    mgig_log_kernel(p.lambda, p.a.base(), p.b.base(), x)
}

/// Unvalidated kernel: `a` and `b` may be any symmetric matrices, which
/// admits the Wishart (`b = 0`) and inverse-Wishart (`a = 0`) limits.
pub fn mgig_log_kernel(lambda: f64, a: &SymMatrix, b: &SymMatrix, x: &SpdMatrix) -> Result<f64> {
    let r = x.dim();
    check_dims(r, a.dim())?;
    check_dims(r, b.dim())?;
    let shape = lambda - (r as f64 + 1.0) / 2.0;
    Ok(shape * x.logdet() - trace_inner(a, x.base())? - x.trace_inverse_product(b))
}

/// Law of `W⁻¹` for `W ~ MGIG(λ, a, b)`: `MGIG(−λ, b, a)`.
pub fn invert_law(p: &MgigParams) -> MgigParams {
    MgigParams {
        lambda: -p.lambda,
        a: p.b.clone(),
        b: p.a.clone(),
    }
}

/// Pointwise change-of-variables residual of the inversion law at `x`:
/// `log f_{W⁻¹}(x⁻¹) − [log f_W(x) + (r+1)·logdet x]`, which vanishes
/// identically for the unnormalized kernels.
pub fn inversion_residual(p: &MgigParams, x: &SpdMatrix) -> Result<f64> {
    let r = x.dim() as f64;
    let inv = x.inverse()?;
    let lhs = mgig_logpdf_unnorm(&invert_law(p), &inv)?;
    let rhs = mgig_logpdf_unnorm(p, x)? + (r + 1.0) * x.logdet();
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::gig::gig_log_kernel;
    use crate::Error;
    use proptest::prelude::*;

    #[test]
    fn identity_point() {
        let a = SpdMatrix::from_diag(&[1.0, 2.0, 3.0]).unwrap();
        let b = SpdMatrix::from_diag(&[0.5, 0.5, 4.0]).unwrap();
        let p = MgigParams::new(1.3, a, b).unwrap();
        let v = p.logpdf_unnorm(&SpdMatrix::identity(3)).unwrap();
        assert!((v - (-6.0 - 5.0)).abs() < 1e-14);
    }

    #[test]
    fn direct_formula_example() {
        let p = MgigParams::new(2.0, SpdMatrix::identity(2), SpdMatrix::identity(2)).unwrap();
        let x = SpdMatrix::from_diag(&[2.0, 2.0]).unwrap();
        let expected = (2.0 - 1.5) * 4.0f64.ln() - 4.0 - 1.0;
        assert!((p.logpdf_unnorm(&x).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn scalar_case_is_gig() {
        for (l, a, b, x) in [(0.7, 1.2, 0.8, 2.5), (-2.0, 0.1, 3.0, 0.3), (4.0, 2.0, 2.0, 1.0)] {
            let p = MgigParams::new(
                l,
                SpdMatrix::from_diag(&[a]).unwrap(),
                SpdMatrix::from_diag(&[b]).unwrap(),
            )
            .unwrap();
            let m = p.logpdf_unnorm(&SpdMatrix::from_diag(&[x]).unwrap()).unwrap();
            let s = gig_log_kernel(l, a, b, x);
            assert!((m - s).abs() <= 1e-15 * s.abs().max(1.0));
        }
    }

    #[test]
    fn inversion_law_examples() {
        let a = SpdMatrix::from_diag(&[1.0, 2.0]).unwrap();
        let b = SpdMatrix::from_diag(&[3.0, 4.0]).unwrap();
        let p = MgigParams::new(0.4, a.clone(), b.clone()).unwrap();
        let q = invert_law(&p);
        assert_eq!(q.lambda, -0.4);
        assert_eq!(q.a, b);
        assert_eq!(q.b, a);
        assert_eq!(invert_law(&q), p);

        let p1 = MgigParams::new(
            1.5,
            SpdMatrix::from_diag(&[0.7]).unwrap(),
            SpdMatrix::from_diag(&[2.0]).unwrap(),
        )
        .unwrap();
        let x = SpdMatrix::from_diag(&[2.0]).unwrap();
        assert!(inversion_residual(&p1, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dims_must_agree() {
        let err = MgigParams::new(1.0, SpdMatrix::identity(2), SpdMatrix::identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
        let p = MgigParams::new(1.0, SpdMatrix::identity(2), SpdMatrix::identity(2)).unwrap();
        assert!(p.logpdf_unnorm(&SpdMatrix::identity(3)).is_err());
    }

    fn spd(dim: usize) -> impl Strategy<Value = SpdMatrix> {
        proptest::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |g| {
            let g = nalgebra::DMatrix::from_row_slice(dim, dim, &g);
            let m = &g * g.transpose() + nalgebra::DMatrix::identity(dim, dim) * 0.3;
            SpdMatrix::from_dmatrix(&m, 1e-12).unwrap()
        })
    }

    proptest! {
        #[test]
        fn inversion_law_holds_pointwise(
            lambda in -4.0f64..4.0,
            (a, b, x) in (1usize..5).prop_flat_map(|d| (spd(d), spd(d), spd(d)))
        ) {
            let p = MgigParams::new(lambda, a, b).unwrap();
            let res = inversion_residual(&p, &x).unwrap();
            let scale = p.logpdf_unnorm(&x).unwrap().abs().max(1.0);
            prop_assert!(res.abs() <= 1e-10 * scale, "residual {res}");
        }
    }
}
