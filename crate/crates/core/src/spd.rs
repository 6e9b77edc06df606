//! Symmetric matrices and the cone of positive definite matrices.
//!
//! [`SymMatrix`] stores the lower triangle only, so symmetry holds by
//! construction. [`SpdMatrix`] carries a Cholesky factor as its membership
//! certificate; the factor is reused for determinants, inverses and solves.
//!
//! Packed and vectorized coordinates both use row-major lower-triangle order:
//! `(0,0), (1,0), (1,1), (2,0), (2,1), (2,2), ...`.

use alloc::vec::Vec;
use nalgebra::DMatrix;
// libm-backed float methods; shadowed by std's when std is linked
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::asymmetry;

const SQRT_2: f64 = core::f64::consts::SQRT_2;

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

/// Number of free coordinates of an `r × r` symmetric matrix.
#[inline]
pub const fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Recover `r` from `r(r+1)/2`.
pub fn dim_from_packed_len(len: usize) -> Option<usize> {
    let mut r = 0;
    while packed_len(r) < len {
        r += 1;
    }
    (packed_len(r) == len && r > 0).then_some(r)
}

/// Real symmetric `r × r` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "symmetric matrices need dim >= 1");
        SymMatrix {
            dim,
            packed: alloc::vec![0.0; packed_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, c);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated on the lower triangle.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.packed[packed_index(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_packed(dim: usize, packed: Vec<f64>) -> Result<Self> {
        if dim == 0 || packed.len() != packed_len(dim) {
            return Err(Error::DimMismatch {
                expected: packed_len(dim),
                found: packed.len(),
            });
        }
        Ok(SymMatrix { dim, packed })
    }

    /// Row-major full matrix; must be exactly symmetric.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        for i in 0..dim {
            for j in 0..i {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::SymmetryLoss {
                        deviation: (data[i * dim + j] - data[j * dim + i]).abs(),
                    });
                }
            }
        }
        Ok(Self::from_lower_fn(dim, |i, j| data[i * dim + j]))
    }

    /// Symmetrizes `(m + mᵀ)/2`, failing if the relative asymmetry of `m`
    /// exceeds `tolerance`.
    pub fn from_dmatrix(m: &DMatrix<f64>, tolerance: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::DimMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let deviation = asymmetry(m);
        if deviation > tolerance || !deviation.is_finite() {
            return Err(Error::SymmetryLoss { deviation });
        }
        Ok(Self::from_lower_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(i, j)] = value;
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        trace_inner_unchecked(self, self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            packed: self.packed.iter().map(|v| c * v).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        Ok(SymMatrix {
            dim: self.dim,
            packed: self.packed.iter().zip(&other.packed).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + c * b)
    }

    /// `true` when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}

/// Cholesky factor of `m` with the pivot threshold `dim · ε · max|entry|`.
fn cholesky_lower(m: &SymMatrix) -> Option<DMatrix<f64>> {
    let n = m.dim();
    let threshold = n as f64 * f64::EPSILON * m.max_abs();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Symmetric positive definite matrix with its Cholesky certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    base: SymMatrix,
    factor: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(base: SymMatrix) -> Result<Self> {
        let factor = cholesky_lower(&base).ok_or(Error::NotSpd)?;
        Ok(SpdMatrix { base, factor })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            base: SymMatrix::identity(dim),
            factor: DMatrix::identity(dim, dim),
        }
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Result<Self> {
        Self::new(SymMatrix::scaled_identity(dim, c))
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diag(diag))
    }

    /// Symmetrize a general square matrix and certify it.
    pub fn from_dmatrix(m: &DMatrix<f64>, symmetry_tolerance: f64) -> Result<Self> {
        Self::new(SymMatrix::from_dmatrix(m, symmetry_tolerance)?)
    }

    /// `L Lᵀ` for a lower-triangular `L` with positive diagonal. The given
    /// factor becomes the certificate as-is.
    pub fn from_cholesky_factor(factor: DMatrix<f64>) -> Result<Self> {
        let n = factor.nrows();
        if n == 0 || !factor.is_square() {
            return Err(Error::DimMismatch {
                expected: n,
                found: factor.ncols(),
            });
        }
        if (0..n).any(|i| !(factor[(i, i)] > 0.0)) {
            return Err(Error::NotSpd);
        }
        let mut lower = factor;
        for i in 0..n {
            for j in (i + 1)..n {
                lower[(i, j)] = 0.0;
            }
        }
        let full = &lower * lower.transpose();
        let base = SymMatrix::from_lower_fn(n, |i, j| full[(i, j)]);
        Ok(SpdMatrix { base, factor: lower })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &SymMatrix {
        &self.base
    }

    pub fn into_base(self) -> SymMatrix {
        self.base
    }

    /// Lower-triangular Cholesky factor.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        self.base.to_dmatrix()
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.factor[(i, i)].ln()).sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        self.logdet().exp()
    }

    /// `m⁻¹ · rhs` through the stored factor.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .factor
            .solve_lower_triangular(rhs)
            .expect("Cholesky factor has a positive diagonal");
        self.factor
            .transpose()
            .solve_upper_triangular(&y)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Dense inverse as a general matrix (symmetric up to rounding).
    pub fn inverse_dmatrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let linv = self
            .factor
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor has a positive diagonal");
        linv.transpose() * linv
    }

    /// Inverse without a conditioning check.
    pub fn inverse(&self) -> Result<SpdMatrix> {
        let inv = self.inverse_dmatrix();
        SpdMatrix::new(SymMatrix::from_lower_fn(self.dim(), |i, j| {
            0.5 * (inv[(i, j)] + inv[(j, i)])
        }))
    }

    /// `tr(self⁻¹ · b)` without forming the inverse.
    pub fn trace_inverse_product(&self, b: &SymMatrix) -> f64 {
        let n = self.dim();
        let linv = self
            .factor
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor has a positive diagonal");
        // tr(L^{-T} L^{-1} b) = tr(L^{-1} b L^{-T})
        let bm = b.to_dmatrix();
        let t = &linv * bm * linv.transpose();
        t.trace()
    }

    /// Ascending eigenvalues and the matching orthonormal eigenvectors
    /// (columns).
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = self.to_dmatrix().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    /// Ratio of the extreme eigenvalues.
    pub fn condition_number(&self) -> f64 {
        let (values, _) = self.eigen();
        let lo = values[0];
        let hi = values[values.len() - 1];
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Applies `f` to the spectrum: `Q diag(f(λ)) Qᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let (values, q) = self.eigen();
        let n = self.dim();
        SymMatrix::from_lower_fn(n, |i, j| (0..n).map(|k| q[(i, k)] * f(values[k]) * q[(j, k)]).sum())
    }
}

/// Conditioning limits for inversion and square roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionGuard {
    pub max_condition: f64,
    pub tolerance_scale: f64,
}

impl Default for ConditionGuard {
    fn default() -> Self {
        ConditionGuard {
            max_condition: 1e8,
            tolerance_scale: 64.0,
        }
    }
}

impl ConditionGuard {
    pub fn new(max_condition: f64, tolerance_scale: f64) -> Result<Self> {
        if !(max_condition >= 1.0) || !(tolerance_scale > 0.0) {
            return Err(Error::InvalidParams(
                "max_condition must be >= 1 and tolerance_scale > 0",
            ));
        }
        Ok(ConditionGuard {
            max_condition,
            tolerance_scale,
        })
    }

    pub fn check(&self, m: &SpdMatrix) -> Result<f64> {
        let condition = m.condition_number();
        if condition > self.max_condition {
            Err(Error::IllConditioned {
                condition,
                max: self.max_condition,
            })
        } else {
            Ok(condition)
        }
    }

    /// Bound on `‖m·m⁻¹ − I‖_F` for a matrix of condition `condition`.
    pub fn inverse_tolerance(&self, condition: f64) -> f64 {
        self.tolerance_scale * condition * f64::EPSILON
    }
}

/// Membership test for the open cone.
pub fn is_spd(m: &SymMatrix) -> bool {
    m.is_finite() && cholesky_lower(m).is_some()
}

pub fn spd_inverse(m: &SpdMatrix, guard: &ConditionGuard) -> Result<SpdMatrix> {
    guard.check(m)?;
    m.inverse()
}

/// Principal square root via the symmetric eigendecomposition.
pub fn spd_sqrt(m: &SpdMatrix, guard: &ConditionGuard) -> Result<SpdMatrix> {
    guard.check(m)?;
    SpdMatrix::new(m.spectral_map(|l| l.sqrt()))
}

pub fn logdet(m: &SpdMatrix) -> f64 {
    m.logdet()
}

fn trace_inner_unchecked(x: &SymMatrix, y: &SymMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..x.dim {
        for j in 0..=i {
            let w = if i == j { 1.0 } else { 2.0 };
            s += w * x.get(i, j) * y.get(i, j);
        }
    }
    s
}

/// `⟨x, y⟩ = tr(xy)`.
pub fn trace_inner(x: &SymMatrix, y: &SymMatrix) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    Ok(trace_inner_unchecked(x, y))
}

/// Quadratic representation `P(x)y = x y x`.
pub fn quad_rep(x: &SpdMatrix, y: &SymMatrix) -> Result<SymMatrix> {
    check_dims(x.dim(), y.dim())?;
    let xm = x.to_dmatrix();
    let p = &xm * y.to_dmatrix() * &xm;
    Ok(SymMatrix::from_lower_fn(x.dim(), |i, j| 0.5 * (p[(i, j)] + p[(j, i)])))
}

/// Isometric coordinates: diagonal entries as-is, off-diagonal entries
/// scaled by √2, lower triangle in row-major order.
pub fn vectorize(m: &SymMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(packed_len(m.dim()));
    for i in 0..m.dim() {
        for j in 0..=i {
            let w = if i == j { 1.0 } else { SQRT_2 };
            out.push(w * m.get(i, j));
        }
    }
    out
}

pub fn devectorize(coords: &[f64], dim: usize) -> Result<SymMatrix> {
    check_dims(packed_len(dim), coords.len())?;
    if dim == 0 {
        return Err(Error::DimMismatch { expected: 1, found: 0 });
    }
    let mut k = 0;
    Ok(SymMatrix::from_lower_fn(dim, |i, j| {
        let w = if i == j { 1.0 } else { SQRT_2 };
        let v = coords[k] / w;
        k += 1;
        v
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m22(a: f64, b: f64, c: f64) -> SymMatrix {
        SymMatrix::from_row_major(2, &[a, b, b, c]).unwrap()
    }

    #[test]
    fn is_spd_examples() {
        assert!(is_spd(&SymMatrix::identity(3)));
        assert!(!is_spd(&SymMatrix::from_diag(&[1.0, -1.0])));
        // eigenvalues 1 and 3
        assert!(is_spd(&m22(2.0, 1.0, 2.0)));
        assert!(!is_spd(&m22(1.0, 1.0, 1.0)));
        assert!(!is_spd(&SymMatrix::from_diag(&[1.0, f64::NAN])));
    }

    #[test]
    fn inverse_examples() {
        let g = ConditionGuard::default();
        let inv = spd_inverse(&SpdMatrix::identity(4), &g).unwrap();
        assert_eq!(inv.base(), &SymMatrix::identity(4));

        let inv = spd_inverse(&SpdMatrix::from_diag(&[2.0, 4.0]).unwrap(), &g).unwrap();
        assert!((inv.base().get(0, 0) - 0.5).abs() < 1e-15);
        assert!((inv.base().get(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(inv.base().get(0, 1), 0.0);

        // adjugate / determinant: (1/3)[[2,-1],[-1,2]]
        let m = SpdMatrix::new(m22(2.0, 1.0, 2.0)).unwrap();
        let inv = spd_inverse(&m, &g).unwrap();
        let expected = m22(2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0);
        assert!(inv.base().sub(&expected).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn inverse_respects_guard() {
        let m = SpdMatrix::from_diag(&[1.0, 1e-9]).unwrap();
        let err = spd_inverse(&m, &ConditionGuard::default()).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { .. }));
        let loose = ConditionGuard::new(1e10, 64.0).unwrap();
        assert!(spd_inverse(&m, &loose).is_ok());
    }

    #[test]
    fn sqrt_examples() {
        let g = ConditionGuard::default();
        let s = spd_sqrt(&SpdMatrix::identity(3), &g).unwrap();
        assert!(s.base().sub(&SymMatrix::identity(3)).unwrap().max_abs() < 1e-15);
        let s = spd_sqrt(&SpdMatrix::from_diag(&[4.0, 9.0]).unwrap(), &g).unwrap();
        assert!((s.base().get(0, 0) - 2.0).abs() < 1e-14);
        assert!((s.base().get(1, 1) - 3.0).abs() < 1e-14);
        assert!(s.base().get(0, 1).abs() < 1e-14);
        // [[2,1],[1,2]]^2 = [[5,4],[4,5]]
        let s = spd_sqrt(&SpdMatrix::new(m22(5.0, 4.0, 5.0)).unwrap(), &g).unwrap();
        assert!(s.base().sub(&m22(2.0, 1.0, 2.0)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn logdet_examples() {
        assert_eq!(logdet(&SpdMatrix::identity(5)), 0.0);
        let e = core::f64::consts::E;
        assert!((logdet(&SpdMatrix::from_diag(&[e, e]).unwrap()) - 2.0).abs() < 1e-15);
        let m = SpdMatrix::new(m22(2.0, 1.0, 2.0)).unwrap();
        assert!((logdet(&m) - 3.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn trace_inner_examples() {
        let i3 = SymMatrix::identity(3);
        assert_eq!(trace_inner(&i3, &i3).unwrap(), 3.0);
        assert_eq!(trace_inner(&m22(1.0, 2.0, 3.0), &SymMatrix::zeros(2)).unwrap(), 0.0);
        // [[1,2],[2,3]]·[[0,1],[1,0]] = [[2,1],[3,2]], trace 4
        assert_eq!(trace_inner(&m22(1.0, 2.0, 3.0), &m22(0.0, 1.0, 0.0)).unwrap(), 4.0);
        let a = SymMatrix::from_row_major(2, &[1.0, 2.0, 2.0, 3.0]).unwrap();
        let b = SymMatrix::from_row_major(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let explicit = (a.to_dmatrix() * b.to_dmatrix()).trace();
        assert_eq!(trace_inner(&a, &b).unwrap(), explicit);
        assert!(matches!(
            trace_inner(&i3, &SymMatrix::identity(2)),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn quad_rep_examples() {
        let y = m22(1.0, 0.5, 3.0);
        let out = quad_rep(&SpdMatrix::identity(2), &y).unwrap();
        assert_eq!(out, y);
        let x = SpdMatrix::new(m22(2.0, 1.0, 2.0)).unwrap();
        let sq = quad_rep(&x, &SymMatrix::identity(2)).unwrap();
        assert!(sq.sub(&m22(5.0, 4.0, 5.0)).unwrap().max_abs() < 1e-15);
        let out = quad_rep(&SpdMatrix::from_diag(&[2.0, 1.0]).unwrap(), &m22(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(out, m22(4.0, 2.0, 1.0));
    }

    #[test]
    fn vectorize_examples() {
        assert_eq!(vectorize(&SymMatrix::identity(2)), alloc::vec![1.0, 0.0, 1.0]);
        let ones = m22(1.0, 1.0, 1.0);
        let v = vectorize(&ones);
        let norm2: f64 = v.iter().map(|c| c * c).sum();
        assert!((norm2 - 4.0).abs() < 1e-15);
        assert!(matches!(devectorize(&[1.0, 2.0], 2), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn from_dmatrix_flags_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            SymMatrix::from_dmatrix(&m, 1e-8),
            Err(Error::SymmetryLoss { .. })
        ));
    }

    #[test]
    fn from_cholesky_factor_round_trip() {
        let l = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.5, 1.5]);
        let m = SpdMatrix::from_cholesky_factor(l.clone()).unwrap();
        let again = SpdMatrix::new(m.base().clone()).unwrap();
        assert!((again.factor() - &l).norm() < 1e-14);
        assert!((m.logdet() - 2.0 * (2.0f64 * 1.5).ln()).abs() < 1e-14);
    }

    fn spd_strategy(max_dim: usize) -> impl Strategy<Value = SpdMatrix> {
        (1..=max_dim).prop_flat_map(|dim| {
            proptest::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |g| {
                let g = DMatrix::from_row_slice(dim, dim, &g);
                let m = &g * g.transpose() + DMatrix::identity(dim, dim) * 0.25;
                SpdMatrix::from_dmatrix(&m, 1e-12).unwrap()
            })
        })
    }

    fn sym_strategy(dim: usize) -> impl Strategy<Value = SymMatrix> {
        proptest::collection::vec(-2.0f64..2.0, packed_len(dim))
            .prop_map(move |p| SymMatrix::from_packed(dim, p).unwrap())
    }

    proptest! {
        #[test]
        fn logdet_of_inverse_is_negated(m in spd_strategy(6)) {
            let inv = spd_inverse(&m, &ConditionGuard::default()).unwrap();
            let (a, b) = (m.logdet(), inv.logdet());
            prop_assert!((a + b).abs() <= 1e-10 * a.abs().max(1.0));
        }

        #[test]
        fn inverse_residual_within_guard_bound(m in spd_strategy(6)) {
            let g = ConditionGuard::default();
            let kappa = g.check(&m).unwrap();
            let inv = spd_inverse(&m, &g).unwrap();
            let res = (m.to_dmatrix() * inv.to_dmatrix()
                - DMatrix::identity(m.dim(), m.dim())).norm();
            prop_assert!(res <= g.inverse_tolerance(kappa), "{res} vs {}", g.inverse_tolerance(kappa));
        }

        #[test]
        fn sqrt_squares_back(m in spd_strategy(6)) {
            let s = spd_sqrt(&m, &ConditionGuard::default()).unwrap();
            let sq = s.to_dmatrix() * s.to_dmatrix();
            prop_assert!((sq - m.to_dmatrix()).norm() <= 1e-10 * m.base().frobenius_norm());
        }

        #[test]
        fn quad_rep_inverse_law(m in spd_strategy(5), seed in any::<u64>()) {
            let dim = m.dim();
            let y = SymMatrix::from_lower_fn(dim, |i, j| {
                let h = seed.wrapping_mul(31 + i as u64).wrapping_add(7 * j as u64);
                (h % 1000) as f64 / 250.0 - 2.0
            });
            let inv = m.inverse().unwrap();
            let back = quad_rep(&m, &quad_rep(&inv, &y).unwrap()).unwrap();
            prop_assert!(back.sub(&y).unwrap().frobenius_norm() <= 1e-9 * y.frobenius_norm().max(1e-300));
        }

        #[test]
        fn vectorize_is_an_isometry(x in sym_strategy(4), y in sym_strategy(4)) {
            let dot: f64 = vectorize(&x).iter().zip(vectorize(&y)).map(|(a, b)| a * b).sum();
            let ip = trace_inner(&x, &y).unwrap();
            prop_assert!((dot - ip).abs() <= 1e-12 * x.frobenius_norm() * y.frobenius_norm() + 1e-300);
            prop_assert_eq!(devectorize(&vectorize(&x), 4).unwrap().sub(&x).unwrap().max_abs() < 1e-15, true);
        }
    }
}
