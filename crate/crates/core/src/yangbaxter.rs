//! The lifts `F₁₂`, `F₁₃`, `F₂₃` of `φ` to triples and the parametric
//! Yang–Baxter relation
//! `F₁₂^(α,β) ∘ F₁₃^(α,γ) ∘ F₂₃^(β,γ) = F₂₃^(β,γ) ∘ F₁₃^(α,γ) ∘ F₁₂^(α,β)`.
//!
//! [`appendix_trace`] evaluates both composition chains step by step
//! together with the intermediate algebraic identities of the classical
//! proof. Those intermediates (`u = yx`, `v = yz`, `s = u + v + βuv`, …)
//! are not symmetric and are kept as general square matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::campaign::{Check, ResidualStats, TrialRunner, VerificationReport};
use crate::distributions::{random_spd, RngStream};
use crate::error::{Error, Result};
use crate::maps::{phi, solve, MapParams, SpdPair};
use crate::numerics::relative_frobenius;
use crate::spd::{check_dims, ConditionGuard, SpdMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SpdTriple {
    pub x: SpdMatrix,
    pub y: SpdMatrix,
    pub z: SpdMatrix,
}

impl SpdTriple {
    pub fn new(x: SpdMatrix, y: SpdMatrix, z: SpdMatrix) -> Result<Self> {
        check_dims(x.dim(), y.dim())?;
        check_dims(x.dim(), z.dim())?;
        Ok(SpdTriple { x, y, z })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn slots(&self) -> [&SpdMatrix; 3] {
        [&self.x, &self.y, &self.z]
    }

    /// `logdet x + logdet y + logdet z`.
    pub fn logdet_sum(&self) -> f64 {
        self.x.logdet() + self.y.logdet() + self.z.logdet()
    }

    /// Slotwise relative Frobenius distances.
    pub fn slot_residuals(&self, other: &SpdTriple) -> [f64; 3] {
        let a = self.slots();
        let b = other.slots();
        core::array::from_fn(|i| relative_frobenius(&a[i].to_dmatrix(), &b[i].to_dmatrix()))
    }

    pub fn random<R: rand::Rng + ?Sized>(dim: usize, max_condition: f64, rng: &mut R) -> SpdTriple {
        SpdTriple {
            x: random_spd(dim, max_condition, rng),
            y: random_spd(dim, max_condition, rng),
            z: random_spd(dim, max_condition, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YbParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl YbParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !(ok(alpha) && ok(beta) && ok(gamma)) {
            return Err(Error::InvalidParams("Yang-Baxter parameters must be finite and >= 0"));
        }
        Ok(YbParams { alpha, beta, gamma })
    }

    pub fn all_equal(&self) -> bool {
        self.alpha == self.beta && self.beta == self.gamma
    }

    pub fn ab(&self) -> MapParams {
        MapParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn ag(&self) -> MapParams {
        MapParams {
            alpha: self.alpha,
            beta: self.gamma,
        }
    }

    pub fn bg(&self) -> MapParams {
        MapParams {
            alpha: self.beta,
            beta: self.gamma,
        }
    }
}

fn pair(a: &SpdMatrix, b: &SpdMatrix) -> SpdPair {
    SpdPair {
        first: a.clone(),
        second: b.clone(),
    }
}

pub fn apply_f12(p: MapParams, t: &SpdTriple) -> Result<SpdTriple> {
    let uv = phi(p, &pair(&t.x, &t.y))?;
    Ok(SpdTriple {
        x: uv.first,
        y: uv.second,
        z: t.z.clone(),
    })
}

pub fn apply_f13(p: MapParams, t: &SpdTriple) -> Result<SpdTriple> {
    let uv = phi(p, &pair(&t.x, &t.z))?;
    Ok(SpdTriple {
        x: uv.first,
        y: t.y.clone(),
        z: uv.second,
    })
}

pub fn apply_f23(p: MapParams, t: &SpdTriple) -> Result<SpdTriple> {
    let uv = phi(p, &pair(&t.y, &t.z))?;
    Ok(SpdTriple {
        x: t.x.clone(),
        y: uv.first,
        z: uv.second,
    })
}

/// `F₂₃` then `F₁₃` then `F₁₂`, returning every intermediate.
fn left_chain(p: &YbParams, f12: MapParams, t: &SpdTriple) -> Result<[SpdTriple; 3]> {
    let a = apply_f23(p.bg(), t)?;
    let b = apply_f13(p.ag(), &a)?;
    let c = apply_f12(f12, &b)?;
    Ok([a, b, c])
}

/// `F₁₂` then `F₁₃` then `F₂₃`.
fn right_chain(p: &YbParams, t: &SpdTriple) -> Result<[SpdTriple; 3]> {
    let a = apply_f12(p.ab(), t)?;
    let b = apply_f13(p.ag(), &a)?;
    let c = apply_f23(p.bg(), &b)?;
    Ok([a, b, c])
}

fn guard_inputs(t: &SpdTriple) -> Result<()> {
    let guard = ConditionGuard::default();
    for m in t.slots() {
        guard.check(m)?;
    }
    Ok(())
}

/// Largest slotwise relative difference between the two sides.
pub fn yb_residual(p: &YbParams, t: &SpdTriple) -> Result<f64> {
    yb_residual_with(p, p.ab(), t)
}

/// As [`yb_residual`], with the parameters of the final `F₁₂` on the
/// left-hand side replaced by `f12`. Used for mutation controls.
pub fn yb_residual_with(p: &YbParams, f12: MapParams, t: &SpdTriple) -> Result<f64> {
    guard_inputs(t)?;
    let lhs = left_chain(p, f12, t)?;
    let rhs = right_chain(p, t)?;
    Ok(lhs[2].slot_residuals(&rhs[2]).into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedResidual {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixTrace {
    /// `(x₁,y₁,z₁)`, `(x₂,y₂,z₂)`, `(x₃,y₃,z₃)`.
    pub lhs_chain: [SpdTriple; 3],
    /// `(X₁,Y₁,Z₁)`, `(X₂,Y₂,Z₂)`, `(X₃,Y₃,Z₃)`.
    pub rhs_chain: [SpdTriple; 3],
    /// `x₃ = X₃`, `y₃ = Y₃`, `z₃ = Z₃`.
    pub residuals: [f64; 3],
    pub auxiliary: Vec<NamedResidual>,
}

impl AppendixTrace {
    pub fn max_chain_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_auxiliary_residual(&self) -> f64 {
        self.auxiliary.iter().map(|a| a.residual).fold(0.0, f64::max)
    }

    pub fn auxiliary(&self, name: &str) -> Option<f64> {
        self.auxiliary.iter().find(|a| a.name == name).map(|a| a.residual)
    }
}

fn inv(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    solve(m, &DMatrix::identity(n, n))
}

/// `s(I+ts) = (I+st)s` and `s(I+ts)⁻¹ = (I+st)⁻¹s`.
pub fn eleq_residuals(s: &SpdMatrix, t: &SpdMatrix) -> Result<[f64; 2]> {
    check_dims(s.dim(), t.dim())?;
    let n = s.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let s = s.to_dmatrix();
    let t = t.to_dmatrix();
    let ts = &id + &t * &s;
    let st = &id + &s * &t;
    let first = relative_frobenius(&(&s * &ts), &(&st * &s));
    let second = relative_frobenius(&(&s * inv(ts)?), &(inv(st)? * &s));
    Ok([first, second])
}

fn auxiliary_identities(
    p: &YbParams,
    t: &SpdTriple,
    lhs: &[SpdTriple; 3],
    rhs: &[SpdTriple; 3],
) -> Result<Vec<NamedResidual>> {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let n = t.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let x = t.x.to_dmatrix();
    let y = t.y.to_dmatrix();
    let z = t.z.to_dmatrix();
    let mut out = Vec::new();
    let mut push = |name: &str, residual: f64| {
        out.push(NamedResidual {
            name: name.into(),
            residual,
        })
    };

    // x₃ in closed form: z[A* + α yx B*]⁻¹[C* + yx(αI + βγ yz)] with
    // A* = I + αyz, B* = I + βyz, C* = I + γyz.
    let yx = &y * &x;
    let yz = &y * &z;
    let a_star = &id + &yz * a;
    let b_star = &id + &yz * b;
    let c_star = &id + &yz * g;
    let x3_closed = &z * solve(a_star + &yx * &b_star * a, &(&c_star + &yx * (&id * a + &yz * (b * g))))?;
    push("x3_closed_form", relative_frobenius(&x3_closed, &lhs[2].x.to_dmatrix()));
    push(
        "x3_closed_form_rhs",
        relative_frobenius(&x3_closed, &rhs[2].x.to_dmatrix()),
    );

    // z⁻¹y₁z₁ = y = x⁻¹Y₁X₁
    let y1z1 = lhs[0].y.to_dmatrix() * lhs[0].z.to_dmatrix();
    push("y_link_lhs", relative_frobenius(&(t.z.inverse_dmatrix() * y1z1), &y));
    let y1x1 = rhs[0].y.to_dmatrix() * rhs[0].x.to_dmatrix();
    push("y_link_rhs", relative_frobenius(&(t.x.inverse_dmatrix() * y1x1), &y));

    let u = yx;
    let v = yz;
    let uv = &u * &v;
    let vu = &v * &u;
    let s = &u + &v + &uv * b;
    // the reversed word
    let s_rev = &u + &v + &vu * b;

    let lhs3 = inv(&id + &u * a + &v * g + &uv * (b * g))?
        * (&id + &s * g)
        * (&id + &s * a)
        * inv(&id + &u * a + &v * g + &uv * (a * b))?;
    let rhs3 = inv(&id + &u * a + &v * g + &vu * (a * b))?
        * (&id + &s_rev * a)
        * (&id + &s_rev * g)
        * inv(&id + &u * a + &v * g + &vu * (b * g))?;
    push("eq3", relative_frobenius(&lhs3, &rhs3));

    let ibv = &id + &v * b;
    let ibu = &id + &u * b;
    push("commute_v", relative_frobenius(&(&ibv * &s), &(&s_rev * &ibv)));
    push("commute_u", relative_frobenius(&(&s * &ibu), &(&ibu * &s_rev)));

    let s_a = inv(&id + &s * a)?;
    let s_g = inv(&id + &s * g)?;
    let sr_a = inv(&id + &s_rev * a)?;
    let sr_g = inv(&id + &s_rev * g)?;
    push(
        "eq5_first",
        relative_frobenius(&(&v * &s_a - &s_a * &u), &(&sr_a * &v - &u * &sr_a)),
    );
    push(
        "eq5_second",
        relative_frobenius(&(&ibv * &s_a * &s_g), &(&sr_g * &sr_a * &ibv)),
    );

    for (label, (s, t)) in [("xy", (&t.x, &t.y)), ("yz", (&t.y, &t.z)), ("xz", (&t.x, &t.z))] {
        let [first, second] = eleq_residuals(s, t)?;
        push(&format!("eleq_{label}"), first);
        push(&format!("eleq_inverse_{label}"), second);
    }
    Ok(out)
}

pub fn appendix_trace(p: &YbParams, t: &SpdTriple) -> Result<AppendixTrace> {
    guard_inputs(t)?;
    let lhs = left_chain(p, p.ab(), t)?;
    let rhs = right_chain(p, t)?;
    let residuals = lhs[2].slot_residuals(&rhs[2]);
    let auxiliary = auxiliary_identities(p, t, &lhs, &rhs)?;
    Ok(AppendixTrace {
        lhs_chain: lhs,
        rhs_chain: rhs,
        residuals,
        auxiliary,
    })
}

/// Stream namespace of the Yang–Baxter campaign.
pub const YB_STREAM: u64 = 0x5942;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YbCampaignConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub params_grid: Vec<YbParams>,
    pub seed: u64,
    pub tolerance: f64,
    /// Tolerance for cells with `α = β = γ`.
    pub equal_tolerance: f64,
    pub max_condition: f64,
    /// Cell whose left `F₁₂` gets `α` and `β` swapped, and the residual it
    /// must exceed.
    pub mutation: Option<MutationControl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationControl {
    pub params: YbParams,
    pub trials: usize,
    pub threshold: f64,
}

pub fn default_yb_grid() -> Vec<YbParams> {
    [
        (2.0, 1.0, 0.5),
        (1.0, 0.0, 2.0),
        (1.0, 1.0, 1.0),
        (0.3, 0.3, 5.0),
        (1.0, 0.0, 0.0),
    ]
    .into_iter()
    .map(|(alpha, beta, gamma)| YbParams { alpha, beta, gamma })
    .collect()
}

impl YbCampaignConfig {
    pub fn new(seed: u64) -> Self {
        YbCampaignConfig {
            dims: alloc::vec![1, 2, 3, 5],
            trials: 500,
            params_grid: default_yb_grid(),
            seed,
            tolerance: 1e-9,
            equal_tolerance: 1e-12,
            max_condition: 1e4,
            mutation: Some(MutationControl {
                params: YbParams {
                    alpha: 2.0,
                    beta: 1.0,
                    gamma: 0.5,
                },
                trials: 100,
                threshold: 1e-2,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YbCell {
    pub params: YbParams,
    pub dim: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationOutcome {
    pub params: YbParams,
    pub max_residual: f64,
    pub median_residual: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YbCampaignReport {
    pub params_grid: Vec<YbParams>,
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub cells: Vec<YbCell>,
    pub mutation: Option<MutationOutcome>,
    pub report: VerificationReport,
}

fn cell_label(p: &YbParams, dim: usize) -> String {
    format!("alpha={},beta={},gamma={},dim={}", p.alpha, p.beta, p.gamma, dim)
}

/// The triple used by trial `trial` at dimension index `dim_index`. Every
/// parameter cell sees the same inputs.
fn campaign_triple(cfg: &YbCampaignConfig, dim_index: usize, trial: usize) -> SpdTriple {
    let stream = RngStream::new(cfg.seed, YB_STREAM).substream((dim_index * cfg.trials + trial) as u64);
    SpdTriple::random(cfg.dims[dim_index], cfg.max_condition, &mut stream.rng())
}

pub fn yb_campaign<R: TrialRunner>(cfg: &YbCampaignConfig, runner: &R) -> Result<YbCampaignReport> {
    if cfg.trials == 0 || cfg.dims.is_empty() || cfg.params_grid.is_empty() {
        return Err(Error::InvalidParams("campaign needs trials, dims and parameters"));
    }
    let per_cell = cfg.trials;
    let n_dims = cfg.dims.len();
    let total = cfg.params_grid.len() * n_dims * per_cell;
    let outcomes: Vec<Result<f64>> = runner.map(total, |k| {
        let cell = k / (n_dims * per_cell);
        let dim_index = (k / per_cell) % n_dims;
        let trial = k % per_cell;
        yb_residual(&cfg.params_grid[cell], &campaign_triple(cfg, dim_index, trial))
    });

    let mut report = VerificationReport::new();
    let mut cells = Vec::new();
    let mut all = Vec::with_capacity(total);
    for (cell, p) in cfg.params_grid.iter().enumerate() {
        for (dim_index, &dim) in cfg.dims.iter().enumerate() {
            let label = cell_label(p, dim);
            let tolerance = if p.all_equal() {
                cfg.equal_tolerance
            } else {
                cfg.tolerance
            };
            let start = (cell * n_dims + dim_index) * per_cell;
            let mut values = Vec::with_capacity(per_cell);
            for (trial, outcome) in outcomes[start..start + per_cell].iter().enumerate() {
                match outcome {
                    Ok(v) => {
                        if !(*v <= tolerance) {
                            report.fail(format!("{label} trial {trial}: residual {v:e}"));
                        }
                        values.push(*v);
                    }
                    Err(e) => report.fail(format!("{label} trial {trial}: {e}")),
                }
            }
            let stats = ResidualStats::from_values(&values);
            report.push(Check::at_most(format!("{label}/max_residual"), stats.max, tolerance));
            all.extend_from_slice(&values);
            cells.push(YbCell {
                params: *p,
                dim,
                max_residual: stats.max,
                mean_residual: stats.mean,
                tolerance,
            });
        }
    }
    let overall = ResidualStats::from_values(&all);

    let mutation = match cfg.mutation {
        Some(m) if m.trials > 0 => {
            let n = m.trials;
            let values: Vec<Result<f64>> = runner.map(n * n_dims, |k| {
                let dim_index = k / n;
                let trial = k % n;
                let t = campaign_triple(cfg, dim_index, trial % cfg.trials);
                yb_residual_with(&m.params, m.params.ab().swapped(), &t)
            });
            let mut ok: Vec<f64> = Vec::with_capacity(values.len());
            for (k, v) in values.into_iter().enumerate() {
                match v {
                    Ok(v) => ok.push(v),
                    Err(e) => report.fail(format!("mutation trial {k}: {e}")),
                }
            }
            let stats = ResidualStats::from_values(&ok);
            ok.sort_by(f64::total_cmp);
            let median = if ok.is_empty() { f64::NAN } else { ok[ok.len() / 2] };
            report.push(Check::above("mutation_control/max_residual", stats.max, m.threshold));
            Some(MutationOutcome {
                params: m.params,
                max_residual: stats.max,
                median_residual: median,
                threshold: m.threshold,
            })
        }
        _ => None,
    };

    Ok(YbCampaignReport {
        params_grid: cfg.params_grid.clone(),
        dims: cfg.dims.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        max_residual: overall.max,
        mean_residual: overall.mean,
        cells,
        mutation,
        report,
    })
}
