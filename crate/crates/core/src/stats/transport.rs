//! Deterministic density-transport checks.
//!
//! `φ` preserves volume, so if `(X, Y)` has density `f_X ⊗ f_Y` and the
//! outputs carry the claimed laws, then
//! `log f_X(x) + log f_Y(y) − log f_U(u) − log f_V(v)` is the same constant
//! at every pair. With unnormalized kernels that constant is the log-ratio
//! of normalizers; the checks report how far it strays from its mean.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::campaign::{Check, TrialRunner, VerificationReport};
use crate::distributions::{gig_log_kernel, mgig_log_kernel, random_spd, RngStream};
use crate::error::{Error, Result};
use crate::maps::{phi, MapParams, SpdPair};
use crate::numerics::CompensatedSum;
use crate::spd::{SpdMatrix, SymMatrix};

/// Coefficients `(λ, a, b)` of the four kernels in one transport identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportLaws {
    pub lambda: f64,
    pub x: (SymMatrix, SymMatrix),
    pub y: (SymMatrix, SymMatrix),
    pub u: (SymMatrix, SymMatrix),
    pub v: (SymMatrix, SymMatrix),
}

impl TransportLaws {
    /// Inputs `MGIG(λ, αa, b) ⊗ MGIG(λ, βb, a)`, outputs
    /// `MGIG(λ, αb, a) ⊗ MGIG(λ, βa, b)`.
    pub fn direc(lambda: f64, a: &SpdMatrix, b: &SpdMatrix, p: MapParams) -> TransportLaws {
        let (a, b) = (a.base(), b.base());
        TransportLaws {
            lambda,
            x: (a.scaled(p.alpha), b.clone()),
            y: (b.scaled(p.beta), a.clone()),
            u: (b.scaled(p.alpha), a.clone()),
            v: (a.scaled(p.beta), b.clone()),
        }
    }

    /// The same laws with `a` multiplied by `factor` in the output laws only.
    pub fn perturb_outputs(&self, a: &SpdMatrix, b: &SpdMatrix, p: MapParams, factor: f64) -> TransportLaws {
        let a2 = a.base().scaled(factor);
        TransportLaws {
            u: (b.base().scaled(p.alpha), a2.clone()),
            v: (a2.scaled(p.beta), b.base().clone()),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOutcome {
    pub pairs: usize,
    /// Mean of `Δ` over the pairs.
    pub mean_delta: f64,
    /// `max |Δ − mean Δ|`.
    pub residual: f64,
}

impl TransportOutcome {
    fn from_deltas(deltas: &[f64]) -> Result<TransportOutcome> {
        if deltas.is_empty() {
            return Err(Error::TooFewSamples { found: 0, required: 1 });
        }
        let mean = deltas.iter().copied().collect::<CompensatedSum>().value() / deltas.len() as f64;
        let mut residual = 0.0f64;
        for d in deltas {
            let dev = (d - mean).abs();
            // NaN poisons the result
            residual = if dev.is_nan() || residual.is_nan() {
                f64::NAN
            } else {
                residual.max(dev)
            };
        }
        Ok(TransportOutcome {
            pairs: deltas.len(),
            mean_delta: mean,
            residual,
        })
    }
}

/// `Δ` at one pair; `offsets` are added to the four log-kernels in the
/// order `x, y, u, v`.
pub fn transport_delta(laws: &TransportLaws, p: MapParams, pair: &SpdPair, offsets: [f64; 4]) -> Result<f64> {
    let uv = phi(p, pair)?;
    let l = laws.lambda;
    let k = |law: &(SymMatrix, SymMatrix), m: &SpdMatrix| mgig_log_kernel(l, &law.0, &law.1, m);
    let input = k(&laws.x, &pair.first)? + offsets[0] + k(&laws.y, &pair.second)? + offsets[1];
    let output = k(&laws.u, &uv.first)? + offsets[2] + k(&laws.v, &uv.second)? + offsets[3];
    Ok(input - output)
}

pub fn transport_check_with(
    laws: &TransportLaws,
    p: MapParams,
    pairs: &[SpdPair],
    offsets: [f64; 4],
) -> Result<TransportOutcome> {
    let deltas = pairs
        .iter()
        .map(|pair| transport_delta(laws, p, pair, offsets))
        .collect::<Result<Vec<f64>>>()?;
    TransportOutcome::from_deltas(&deltas)
}

/// Constancy of `Δ` for the laws of the direct independence property.
pub fn density_transport_check(
    lambda: f64,
    a: &SpdMatrix,
    b: &SpdMatrix,
    p: MapParams,
    pairs: &[SpdPair],
) -> Result<TransportOutcome> {
    crate::spd::check_dims(a.dim(), b.dim())?;
    transport_check_with(&TransportLaws::direc(lambda, a, b, p), p, pairs, [0.0; 4])
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(Error::Domain("log grid needs 0 < lo <= hi and n >= 1"));
    }
    if n == 1 {
        return Ok(alloc::vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Parameters of the scalar functional equation. The four laws are
/// `X ~ GIG(−λ, αγ₁, γ₂)`, `Y ~ GIG(λ, γ₁, βγ₂)`, `U ~ GIG(−λ, αγ₂, γ₁)`
/// and `V ~ GIG(λ, γ₂, βγ₁)`, with densities `∝ x^{λ−1} e^{−αx−β/x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// `LHS − RHS` at `(σ, τ)`; `output_gamma1` replaces `γ₁` in the `U` and
/// `V` laws.
fn eff_gap(p: &EffParams, output_gamma1: f64, sigma: f64, tau: f64) -> f64 {
    let EffParams {
        lambda: l,
        alpha: a,
        beta: b,
        gamma1: g1,
        gamma2: g2,
    } = *p;
    let f = (tau + b * sigma) / (tau + a * sigma);
    let lhs = gig_log_kernel(-l, a * g2, output_gamma1, f / tau)
        + gig_log_kernel(l, g2, b * output_gamma1, f / sigma)
        + 2.0 * ((tau + b * sigma) / (tau * sigma * (tau + a * sigma))).ln();
    let rhs = gig_log_kernel(-l, a * g1, g2, sigma) + gig_log_kernel(l, g1, b * g2, tau);
    lhs - rhs
}

fn eff_residual(p: &EffParams, output_gamma1: f64, grid: &[(f64, f64)]) -> Result<f64> {
    if grid
        .iter()
        .any(|&(s, t)| !(s > 0.0 && t > 0.0 && s.is_finite() && t.is_finite()))
    {
        return Err(Error::Domain(
            "functional equation grid must lie in the open positive quadrant",
        ));
    }
    let gaps: Vec<f64> = grid.iter().map(|&(s, t)| eff_gap(p, output_gamma1, s, t)).collect();
    Ok(TransportOutcome::from_deltas(&gaps)?.residual)
}

/// Max deviation of `LHS − RHS` of the scalar functional equation from
/// its grid mean.
pub fn univariate_eff_check(p: &EffParams, grid: &[(f64, f64)]) -> Result<f64> {
    eff_residual(p, p.gamma1, grid)
}

/// The same residual with `γ₁` multiplied by `factor` in the output laws.
pub fn eff_mutation_residual(p: &EffParams, factor: f64, grid: &[(f64, f64)]) -> Result<f64> {
    eff_residual(p, p.gamma1 * factor, grid)
}

/// Cartesian product of two axes.
pub fn product_grid(sigma: &[f64], tau: &[f64]) -> Vec<(f64, f64)> {
    sigma.iter().flat_map(|&s| tau.iter().map(move |&t| (s, t))).collect()
}

/// One `(λ, α, β)` setting of the transport campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportSetting {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub const TRANSPORT_STREAM: u64 = 0x5452;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportCampaignConfig {
    pub settings: Vec<TransportSetting>,
    pub dims: Vec<usize>,
    pub pairs: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub eff: EffParams,
    pub eff_grid_points: usize,
    pub eff_tolerance: f64,
    /// Factor applied to `a` (transport) and `γ₁` (functional equation) in
    /// the output laws of the mutation controls.
    pub mutation_factor: f64,
    pub mutation_threshold: f64,
    pub max_condition: f64,
}

impl TransportCampaignConfig {
    pub fn new(seed: u64) -> Self {
        let s = |lambda, alpha, beta| TransportSetting { lambda, alpha, beta };
        TransportCampaignConfig {
            settings: alloc::vec![
                s(0.7, 2.0, 0.5),
                s(1.5, 1.0, 0.0),
                s(-1.2, 0.4, 2.5),
                s(3.0, 1.0, 1.0),
                s(-0.3, 5.0, 0.1),
            ],
            dims: alloc::vec![1, 2, 3],
            pairs: 1000,
            seed,
            tolerance: 1e-9,
            eff: EffParams {
                lambda: 1.3,
                alpha: 2.0,
                beta: 0.5,
                gamma1: 1.5,
                gamma2: 0.7,
            },
            eff_grid_points: 50,
            eff_tolerance: 1e-10,
            mutation_factor: 1.1,
            mutation_threshold: 1e-2,
            max_condition: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportCell {
    pub setting: TransportSetting,
    pub dim: usize,
    pub outcome: TransportOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportCampaignReport {
    pub seed: u64,
    pub cells: Vec<TransportCell>,
    pub max_residual: f64,
    pub eff_residual: f64,
    pub transport_mutation_residual: f64,
    pub eff_mutation_residual: f64,
    pub report: VerificationReport,
}

/// Random `(a, b, pairs)` for cell `index`.
fn cell_inputs(cfg: &TransportCampaignConfig, dim: usize, index: u64) -> (SpdMatrix, SpdMatrix, Vec<SpdPair>) {
    let mut rng = RngStream::new(cfg.seed, TRANSPORT_STREAM).substream(index).rng();
    let a = random_spd(dim, cfg.max_condition, &mut rng);
    let b = random_spd(dim, cfg.max_condition, &mut rng);
    let pairs = (0..cfg.pairs)
        .map(|_| {
            let x = random_spd(dim, cfg.max_condition, &mut rng);
            let y = random_spd(dim, cfg.max_condition, &mut rng);
            SpdPair { first: x, second: y }
        })
        .collect();
    (a, b, pairs)
}

pub fn transport_campaign<R: TrialRunner>(
    cfg: &TransportCampaignConfig,
    runner: &R,
) -> Result<TransportCampaignReport> {
    if cfg.settings.is_empty() || cfg.dims.is_empty() || cfg.pairs == 0 {
        return Err(Error::InvalidParams(
            "transport campaign needs settings, dims and pairs",
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.dims.len())
        .flat_map(|d| (0..cfg.settings.len()).map(move |s| (d, s)))
        .collect();
    let results = runner.map(jobs.len(), |j| {
        let (d, s) = jobs[j];
        let dim = cfg.dims[d];
        let setting = cfg.settings[s];
        let p = MapParams::new(setting.alpha, setting.beta)?;
        let (a, b, pairs) = cell_inputs(cfg, dim, j as u64);
        let outcome = density_transport_check(setting.lambda, &a, &b, p, &pairs)?;
        // mutation on the first cell of each dimension
        let mutated = if s == 0 {
            let laws = TransportLaws::direc(setting.lambda, &a, &b, p).perturb_outputs(&a, &b, p, cfg.mutation_factor);
            Some(transport_check_with(&laws, p, &pairs, [0.0; 4])?.residual)
        } else {
            None
        };
        Ok::<_, Error>((TransportCell { setting, dim, outcome }, mutated))
    });

    let mut report = VerificationReport::new();
    let mut cells = Vec::new();
    let mut mutation = f64::INFINITY;
    for r in results {
        let (cell, mutated) = r?;
        report.push(Check::at_most(
            format!(
                "transport/r{}/lambda{}_alpha{}_beta{}",
                cell.dim, cell.setting.lambda, cell.setting.alpha, cell.setting.beta
            ),
            cell.outcome.residual,
            cfg.tolerance,
        ));
        if let Some(m) = mutated {
            mutation = mutation.min(m);
        }
        cells.push(cell);
    }
    let max_residual = cells.iter().map(|c| c.outcome.residual).fold(0.0, f64::max);
    report.push(Check::above(
        "transport/mutation_control",
        mutation,
        cfg.mutation_threshold,
    ));

    let axis = log_grid(1e-2, 1e2, cfg.eff_grid_points)?;
    let grid = product_grid(&axis, &axis);
    let eff = univariate_eff_check(&cfg.eff, &grid)?;
    let eff_mut = eff_mutation_residual(&cfg.eff, cfg.mutation_factor, &grid)?;
    report.push(Check::at_most("eff/constancy", eff, cfg.eff_tolerance));
    report.push(Check::above("eff/mutation_control", eff_mut, cfg.mutation_threshold));

    Ok(TransportCampaignReport {
        seed: cfg.seed,
        cells,
        max_residual,
        eff_residual: eff,
        transport_mutation_residual: mutation,
        eff_mutation_residual: eff_mut,
        report,
    })
}
