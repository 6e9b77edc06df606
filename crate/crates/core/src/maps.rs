//! The scalar maps `H_III,B` and its reciprocal form, the matrix map `φ`,
//! its conjugate `ψ = θ∘φ∘θ` with `θ(x, y) = (x, y⁻¹)`, and the
//! quadratic-representation form of `φ`. Jacobian and derivative checkers
//! work by central finite differences in isometric coordinates.

use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::relative_frobenius;
use crate::spd::{check_dims, devectorize, quad_rep, spd_sqrt, vectorize, ConditionGuard, SpdMatrix, SymMatrix};

/// Largest relative asymmetry tolerated in a raw map output before it is
/// reported as [`Error::SymmetryLoss`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Default finite-difference step, relative to the norm of the input.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MapParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite() && beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParams("map parameters must be finite and >= 0"));
        }
        Ok(MapParams { alpha, beta })
    }

    /// `α = β`: the maps reduce to swaps and carry no characterization content.
    pub fn is_degenerate(&self) -> bool {
        self.alpha == self.beta
    }

    pub fn swapped(&self) -> MapParams {
        MapParams {
            alpha: self.beta,
            beta: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdPair {
    pub first: SpdMatrix,
    pub second: SpdMatrix,
}

impl SpdPair {
    pub fn new(first: SpdMatrix, second: SpdMatrix) -> Result<Self> {
        check_dims(first.dim(), second.dim())?;
        Ok(SpdPair { first, second })
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn swap(&self) -> SpdPair {
        SpdPair {
            first: self.second.clone(),
            second: self.first.clone(),
        }
    }

    /// `vectorize(first) ++ vectorize(second)`.
    pub fn coordinates(&self) -> Vec<f64> {
        let mut c = vectorize(self.first.base());
        c.extend(vectorize(self.second.base()));
        c
    }

    pub fn from_coordinates(coords: &[f64], dim: usize) -> Result<Self> {
        let half = coords.len() / 2;
        check_dims(dim * (dim + 1), coords.len())?;
        SpdPair::new(
            SpdMatrix::new(devectorize(&coords[..half], dim)?)?,
            SpdMatrix::new(devectorize(&coords[half..], dim)?)?,
        )
    }

    /// `√(‖x‖_F² + ‖y‖_F²)`.
    pub fn norm(&self) -> f64 {
        let a = self.first.base().frobenius_norm();
        let b = self.second.base().frobenius_norm();
        (a * a + b * b).sqrt()
    }

    /// Relative distance to `other`, in the norm of the product space.
    pub fn relative_distance(&self, other: &SpdPair) -> Result<f64> {
        let d1 = self.first.base().sub(other.first.base())?.frobenius_norm();
        let d2 = self.second.base().sub(other.second.base())?.frobenius_norm();
        let scale = self.norm().max(other.norm());
        Ok(if scale == 0.0 {
            0.0
        } else {
            (d1 * d1 + d2 * d2).sqrt() / scale
        })
    }
}

/// `a⁻¹ b` for a general square `a`.
pub(crate) fn solve(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.lu()
        .solve(b)
        .ok_or(Error::Domain("singular matrix in map evaluation"))
}

/// Symmetrizes and certifies a raw map output.
pub(crate) fn certify(m: &DMatrix<f64>) -> Result<SpdMatrix> {
    SpdMatrix::from_dmatrix(m, SYMMETRY_TOLERANCE)
}

fn check_positive(x: f64, y: f64) -> Result<()> {
    if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain("scalar maps need positive finite inputs"))
    }
}

/// `(y(1+βxy)/(1+αxy), x(1+αxy)/(1+βxy))`.
pub fn h3b(p: MapParams, x: f64, y: f64) -> Result<(f64, f64)> {
    check_positive(x, y)?;
    let a = 1.0 + p.alpha * x * y;
    let b = 1.0 + p.beta * x * y;
    Ok((y * b / a, x * a / b))
}

/// `((βx+y)/(y(αx+y)), (βx+y)/(x(αx+y)))`.
pub fn gig1_map(p: MapParams, x: f64, y: f64) -> Result<(f64, f64)> {
    check_positive(x, y)?;
    let num = p.beta * x + y;
    let den = p.alpha * x + y;
    Ok((num / (y * den), num / (x * den)))
}

/// The same map written affinely in the reciprocals:
/// `u = (β/α)/y + (1 − β/α)/(αx+y)`, `v = 1/x + (β−α)/(αx+y)`.
pub fn gig1_map_affine(p: MapParams, x: f64, y: f64) -> Result<(f64, f64)> {
    check_positive(x, y)?;
    if p.alpha <= 0.0 {
        return Err(Error::Domain("affine form divides by alpha"));
    }
    let ratio = p.beta / p.alpha;
    let s = 1.0 / (p.alpha * x + y);
    Ok((ratio / y + (1.0 - ratio) * s, 1.0 / x + (p.beta - p.alpha) * s))
}

/// Unsymmetrized `(y(I+αxy)⁻¹(I+βxy), x(I+βyx)⁻¹(I+αyx))`.
pub fn phi_raw(p: MapParams, xy: &SpdPair) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = xy.dim();
    let x = xy.first.to_dmatrix();
    let y = xy.second.to_dmatrix();
    let id = DMatrix::<f64>::identity(r, r);
    let xy_m = &x * &y;
    let yx_m = &y * &x;
    let u = &y * solve(&id + &xy_m * p.alpha, &(&id + &xy_m * p.beta))?;
    let v = &x * solve(&id + &yx_m * p.beta, &(&id + &yx_m * p.alpha))?;
    Ok((u, v))
}

pub fn phi(p: MapParams, xy: &SpdPair) -> Result<SpdPair> {
    let (u, v) = phi_raw(p, xy)?;
    SpdPair::new(certify(&u)?, certify(&v)?)
}

/// Unsymmetrized `((αx+y)⁻¹(βx+y)y⁻¹, (αx+y)⁻¹(βx+y)x⁻¹)`.
pub fn psi_raw(p: MapParams, xy: &SpdPair) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let x = xy.first.to_dmatrix();
    let y = xy.second.to_dmatrix();
    let core = solve(&x * p.alpha + &y, &(&x * p.beta + &y))?;
    let u = &core * xy.second.inverse_dmatrix();
    let v = &core * xy.first.inverse_dmatrix();
    Ok((u, v))
}

pub fn psi(p: MapParams, xy: &SpdPair) -> Result<SpdPair> {
    let (u, v) = psi_raw(p, xy)?;
    SpdPair::new(certify(&u)?, certify(&v)?)
}

/// `ψ` through the affine-in-inverses form; needs `α > 0`.
pub fn psi_affine(p: MapParams, xy: &SpdPair) -> Result<SpdPair> {
    if p.alpha <= 0.0 {
        return Err(Error::Domain("affine form divides by alpha"));
    }
    let x = xy.first.to_dmatrix();
    let y = xy.second.to_dmatrix();
    let s = SpdMatrix::from_dmatrix(&(&x * p.alpha + &y), SYMMETRY_TOLERANCE)?.inverse_dmatrix();
    let ratio = p.beta / p.alpha;
    let u = xy.second.inverse_dmatrix() * ratio + &s * (1.0 - ratio);
    let v = xy.first.inverse_dmatrix() + &s * (p.beta - p.alpha);
    SpdPair::new(certify(&u)?, certify(&v)?)
}

/// `θ(x, y) = (x, y⁻¹)`.
pub fn theta(xy: &SpdPair) -> Result<SpdPair> {
    SpdPair::new(xy.first.clone(), xy.second.inverse()?)
}

/// `(U, V) = ((X+Y)⁻¹, X⁻¹ − (X+Y)⁻¹)`, which is `ψ` at `(α, β) = (1, 0)`.
pub fn my_map(xy: &SpdPair) -> Result<SpdPair> {
    let s = SpdMatrix::new(xy.first.base().add(xy.second.base())?)?;
    let u = s.inverse_dmatrix();
    let v = xy.first.inverse_dmatrix() - &u;
    SpdPair::new(certify(&u)?, certify(&v)?)
}

/// `u = y^{1/2} P((I+βw)^{1/2}) (I+αw)⁻¹ y^{1/2}` with `w = P(y^{1/2})x`,
/// and `v` from the same expression with `(x, α)` and `(y, β)` exchanged.
pub fn cone_candidate(p: MapParams, xy: &SpdPair) -> Result<SpdPair> {
    let guard = ConditionGuard::default();
    let half = |x: &SpdMatrix, y: &SpdMatrix, a: f64, b: f64| -> Result<SpdMatrix> {
        let r = x.dim();
        let y_half = spd_sqrt(y, &guard)?;
        let w = quad_rep(&y_half, x.base())?;
        let shifted = |c: f64| SpdMatrix::new(SymMatrix::identity(r).add_scaled(c, &w)?);
        let b_half = spd_sqrt(&shifted(b)?, &guard)?;
        let c_inv = shifted(a)?.inverse()?;
        let inner = quad_rep(&b_half, c_inv.base())?;
        SpdMatrix::new(quad_rep(&y_half, &inner)?)
    };
    let u = half(&xy.first, &xy.second, p.alpha, p.beta)?;
    let v = half(&xy.second, &xy.first, p.beta, p.alpha)?;
    SpdPair::new(u, v)
}

/// `|det|` of the central-difference Jacobian of `f` at `xy`, in the
/// coordinates of [`SpdPair::coordinates`]. `h_step` defaults to
/// [`FD_RELATIVE_STEP`] times the norm of `xy`.
pub fn fd_jacobian_det(f: impl Fn(&SpdPair) -> Result<SpdPair>, xy: &SpdPair, h_step: Option<f64>) -> Result<f64> {
    let dim = xy.dim();
    let base = xy.coordinates();
    let n = base.len();
    let h = h_step.unwrap_or(FD_RELATIVE_STEP * xy.norm());
    if !(h > 0.0) {
        return Err(Error::InvalidParams("finite-difference step must be positive"));
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let mut probe = base.clone();
    for k in 0..n {
        probe[k] = base[k] + h;
        let up = f(&SpdPair::from_coordinates(&probe, dim)?)?.coordinates();
        probe[k] = base[k] - h;
        let down = f(&SpdPair::from_coordinates(&probe, dim)?)?.coordinates();
        probe[k] = base[k];
        for i in 0..n {
            jac[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(jac.determinant().abs())
}

pub fn phi_jacobian_fd(p: MapParams, xy: &SpdPair, h_step: Option<f64>) -> Result<f64> {
    ConditionGuard::default().check(&xy.first)?;
    ConditionGuard::default().check(&xy.second)?;
    fd_jacobian_det(|q| phi(p, q), xy, h_step)
}

/// `(fd_value, closed_form)` with `closed_form = (det v / det y)^{r+1}`.
pub fn psi_jacobian_check(p: MapParams, xy: &SpdPair, h_step: Option<f64>) -> Result<(f64, f64)> {
    ConditionGuard::default().check(&xy.first)?;
    ConditionGuard::default().check(&xy.second)?;
    let fd = fd_jacobian_det(|q| psi(p, q), xy, h_step)?;
    let uv = psi(p, xy)?;
    let r = xy.dim() as f64;
    let closed = ((uv.second.logdet() - xy.second.logdet()) * (r + 1.0)).exp();
    Ok((fd, closed))
}

/// `φ^(α,β)(cx, cy)` compared with `c·φ^(c²α, c²β)(x, y)`.
pub fn scaling_residual(p: MapParams, xy: &SpdPair, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain("scaling factor must be positive"));
    }
    let scaled = SpdPair::new(
        SpdMatrix::new(xy.first.base().scaled(c))?,
        SpdMatrix::new(xy.second.base().scaled(c))?,
    )?;
    let lhs = phi(p, &scaled)?;
    let q = MapParams::new(c * c * p.alpha, c * c * p.beta)?;
    let inner = phi(q, xy)?;
    let rhs = SpdPair::new(
        SpdMatrix::new(inner.first.base().scaled(c))?,
        SpdMatrix::new(inner.second.base().scaled(c))?,
    )?;
    lhs.relative_distance(&rhs)
}

/// Identities for `(u, v) = ψ(x, y)` with `z = (βx+y)⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivativeIdentity {
    /// `D_x u⁻¹(h) = (α−β) y z h z y`
    Dux,
    /// `D_y v⁻¹(h) = −(α−β) x z h z x`
    Dvy,
    /// `D_y u⁻¹(h) = h + β(α−β) x z h z x`
    Duy,
    /// `D_x v⁻¹(h) = (α/β) h − ((α−β)/β) y z h z y`
    Dvx,
    /// `D_y(zy)(h) = β z h z x`
    DyZy,
    /// `D_y(yz)(h) = β x z h z`
    DyYz,
}

impl DerivativeIdentity {
    pub const ALL: [DerivativeIdentity; 6] = [
        DerivativeIdentity::Dux,
        DerivativeIdentity::Dvy,
        DerivativeIdentity::Duy,
        DerivativeIdentity::Dvx,
        DerivativeIdentity::DyZy,
        DerivativeIdentity::DyYz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DerivativeIdentity::Dux => "dux",
            DerivativeIdentity::Dvy => "dvy",
            DerivativeIdentity::Duy => "duy",
            DerivativeIdentity::Dvx => "dvx",
            DerivativeIdentity::DyZy => "dy_zy",
            DerivativeIdentity::DyYz => "dy_yz",
        }
    }

    pub fn divides_by_beta(&self) -> bool {
        matches!(self, DerivativeIdentity::Dvx)
    }

    /// Whether the direction perturbs `x` (otherwise `y`).
    fn along_x(&self) -> bool {
        matches!(self, DerivativeIdentity::Dux | DerivativeIdentity::Dvx)
    }
}

/// The algebraic identities of the same family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgebraicIdentity {
    /// `u⁻¹ = (α/β) y − ((α−β)/β) y z y`
    R1,
    /// `v⁻¹ = x + (α−β) x z x`
    R2,
    /// `β v⁻¹ + u⁻¹ = αx + y`
    Linear,
}

impl AlgebraicIdentity {
    pub const ALL: [AlgebraicIdentity; 3] = [AlgebraicIdentity::R1, AlgebraicIdentity::R2, AlgebraicIdentity::Linear];

    pub fn name(&self) -> &'static str {
        match self {
            AlgebraicIdentity::R1 => "r1",
            AlgebraicIdentity::R2 => "r2",
            AlgebraicIdentity::Linear => "linear",
        }
    }

    pub fn divides_by_beta(&self) -> bool {
        matches!(self, AlgebraicIdentity::R1)
    }
}

fn z_matrix(p: MapParams, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = x.nrows();
    solve(x * p.beta + y, &DMatrix::identity(r, r))
}

/// Inverses of the components of `ψ(x, y)`, computed from the map itself.
fn psi_inverses(p: MapParams, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let pair = SpdPair::new(certify(x)?, certify(y)?)?;
    let uv = psi(p, &pair)?;
    Ok((uv.first.inverse_dmatrix(), uv.second.inverse_dmatrix()))
}

fn quantity(which: DerivativeIdentity, p: MapParams, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    use DerivativeIdentity::*;
    match which {
        Dux | Duy => Ok(psi_inverses(p, x, y)?.0),
        Dvy | Dvx => Ok(psi_inverses(p, x, y)?.1),
        DyZy => Ok(z_matrix(p, x, y)? * y),
        DyYz => Ok(y * z_matrix(p, x, y)?),
    }
}

fn closed_form(
    which: DerivativeIdentity,
    p: MapParams,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    use DerivativeIdentity::*;
    let (a, b) = (p.alpha, p.beta);
    let z = z_matrix(p, x, y)?;
    Ok(match which {
        Dux => (y * &z * h * &z * y) * (a - b),
        Dvy => (x * &z * h * &z * x) * (-(a - b)),
        Duy => h + (x * &z * h * &z * x) * (b * (a - b)),
        Dvx => h * (a / b) - (y * &z * h * &z * y) * ((a - b) / b),
        DyZy => (&z * h * &z * x) * b,
        DyYz => (x * &z * h * &z) * b,
    })
}

/// Relative residual of one derivative identity in direction `h`. The
/// denominator is floored at the size a generic directional derivative
/// of the quantity would have, so identities whose derivative vanishes
/// exactly are not judged on pure rounding noise.
pub fn derivative_identity_residual(
    which: DerivativeIdentity,
    p: MapParams,
    xy: &SpdPair,
    h: &SymMatrix,
) -> Result<f64> {
    check_dims(xy.dim(), h.dim())?;
    if which.divides_by_beta() && p.beta == 0.0 {
        return Err(Error::Domain("identity divides by beta"));
    }
    let x = xy.first.to_dmatrix();
    let y = xy.second.to_dmatrix();
    let hm = h.to_dmatrix();
    let h_norm = hm.norm();
    if h_norm == 0.0 {
        return Ok(0.0);
    }
    let central = |t: f64| -> Result<DMatrix<f64>> {
        let (xp, yp, xm, ym) = if which.along_x() {
            (&x + &hm * t, y.clone(), &x - &hm * t, y.clone())
        } else {
            (x.clone(), &y + &hm * t, x.clone(), &y - &hm * t)
        };
        Ok((quantity(which, p, &xp, &yp)? - quantity(which, p, &xm, &ym)?) / (2.0 * t))
    };
    // one Richardson step: the O(t²) error term cancels
    let t = FD_RELATIVE_STEP * xy.norm() / h_norm;
    let fd = (central(t / 2.0)? * 4.0 - central(t)?) / 3.0;
    let exact = closed_form(which, p, &x, &y, &hm)?;
    let natural = quantity(which, p, &x, &y)?.norm() * h_norm / xy.norm();
    let scale = fd.norm().max(exact.norm()).max(natural);
    Ok((fd - exact).norm() / scale)
}

pub fn algebraic_identity_residual(which: AlgebraicIdentity, p: MapParams, xy: &SpdPair) -> Result<f64> {
    if which.divides_by_beta() && p.beta == 0.0 {
        return Err(Error::Domain("identity divides by beta"));
    }
    let x = xy.first.to_dmatrix();
    let y = xy.second.to_dmatrix();
    let (a, b) = (p.alpha, p.beta);
    let (u_inv, v_inv) = psi_inverses(p, &x, &y)?;
    let z = z_matrix(p, &x, &y)?;
    Ok(match which {
        AlgebraicIdentity::R1 => relative_frobenius(&u_inv, &(&y * (a / b) - (&y * &z * &y) * ((a - b) / b))),
        AlgebraicIdentity::R2 => relative_frobenius(&v_inv, &(&x + (&x * &z * &x) * (a - b))),
        AlgebraicIdentity::Linear => relative_frobenius(&(v_inv * b + u_inv), &(&x * a + &y)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub name: &'static str,
    /// `None` when the identity divides by a zero `β` and was skipped.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub finite_difference: Vec<IdentityResidual>,
    pub algebraic: Vec<IdentityResidual>,
}

impl DerivativeReport {
    pub fn max_fd_residual(&self) -> f64 {
        max_residual(&self.finite_difference)
    }

    pub fn max_algebraic_residual(&self) -> f64 {
        max_residual(&self.algebraic)
    }
}

fn max_residual(entries: &[IdentityResidual]) -> f64 {
    entries.iter().filter_map(|e| e.residual).fold(0.0, f64::max)
}

/// Every applicable identity at `(x, y)` in direction `h`; identities that
/// divide by `β` are skipped when `β = 0`.
pub fn derivative_identities_check(p: MapParams, xy: &SpdPair, h: &SymMatrix) -> Result<DerivativeReport> {
    let finite_difference = DerivativeIdentity::ALL
        .iter()
        .map(|&w| {
            let residual = if w.divides_by_beta() && p.beta == 0.0 {
                None
            } else {
                Some(derivative_identity_residual(w, p, xy, h)?)
            };
            Ok(IdentityResidual {
                name: w.name(),
                residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let algebraic = AlgebraicIdentity::ALL
        .iter()
        .map(|&w| {
            let residual = if w.divides_by_beta() && p.beta == 0.0 {
                None
            } else {
                Some(algebraic_identity_residual(w, p, xy)?)
            };
            Ok(IdentityResidual {
                name: w.name(),
                residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DerivativeReport {
        finite_difference,
        algebraic,
    })
}
