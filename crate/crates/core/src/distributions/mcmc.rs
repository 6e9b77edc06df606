//! Random-walk Metropolis sampling, specialised to MGIG on the SPD cone.
//!
//! The MGIG chain runs in log-Cholesky coordinates: `x = L Lᵀ` with `L`
//! lower triangular, the strictly-lower entries of `L` kept as-is and the
//! diagonal stored as `log L_ii`. This chart is a global diffeomorphism
//! onto the cone, so an unconstrained Gaussian walk never leaves it. The
//! Lebesgue volume element pulls back to
//! `2^r ∏_i L_ii^{r−i+1} · ∏_i L_ii` (1-based `i`), which enters the
//! acceptance ratio as `Σ_i (r − i + 2)·log L_ii`.

use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::campaign::TrialRunner;
use crate::distributions::mgig::{mgig_logpdf_unnorm, MgigParams};
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::numerics::effective_sample_size;
use crate::spd::{packed_len, SpdMatrix};

/// Unnormalized log target on a state space.
pub trait LogTarget {
    type State: Clone;
    fn log_density(&self, state: &Self::State) -> f64;
}

/// A proposal whose transition density is symmetric, so the Hastings
/// correction cancels.
pub trait SymmetricProposal<S> {
    fn propose<R: Rng + ?Sized>(&self, current: &S, rng: &mut R) -> S;
}

/// One Metropolis step. Returns whether the proposal was accepted.
pub fn metropolis_step<T, P, R>(
    target: &T,
    proposal: &P,
    state: &mut T::State,
    log_density: &mut f64,
    rng: &mut R,
) -> bool
where
    T: LogTarget,
    P: SymmetricProposal<T::State>,
    R: Rng + ?Sized,
{
    let candidate = proposal.propose(state, rng);
    let candidate_ld = target.log_density(&candidate);
    if !candidate_ld.is_finite() {
        return false;
    }
    let log_ratio = candidate_ld - *log_density;
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        *state = candidate;
        *log_density = candidate_ld;
    }
    accept
}

/// Isotropic Gaussian random walk on `ℝ^d`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianWalk {
    pub scale: f64,
}

impl SymmetricProposal<Vec<f64>> for GaussianWalk {
    fn propose<R: Rng + ?Sized>(&self, current: &Vec<f64>, rng: &mut R) -> Vec<f64> {
        current
            .iter()
            .map(|c| c + self.scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub step_scale: f64,
    pub target_accept: f64,
    pub adapt: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 2_000,
            thin: 10,
            step_scale: 0.5,
            target_accept: 0.3,
            adapt: true,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin < 1 {
            return Err(Error::InvalidParams("thin must be >= 1"));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::InvalidParams("step_scale must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParams("target_accept must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// MGIG target expressed in log-Cholesky coordinates.
pub struct LogCholeskyMgig<'a> {
    params: &'a MgigParams,
}

impl<'a> LogCholeskyMgig<'a> {
    pub fn new(params: &'a MgigParams) -> Self {
        LogCholeskyMgig { params }
    }
}

/// Lower-triangular factor from log-Cholesky coordinates (packed row-major,
/// diagonal entries logged).
pub fn factor_from_coords(coords: &[f64], dim: usize) -> DMatrix<f64> {
    let mut l = DMatrix::<f64>::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in 0..=i {
            l[(i, j)] = if i == j { coords[k].exp() } else { coords[k] };
            k += 1;
        }
    }
    l
}

pub fn coords_from_spd(x: &SpdMatrix) -> Vec<f64> {
    let l = x.factor();
    let dim = x.dim();
    let mut out = Vec::with_capacity(packed_len(dim));
    for i in 0..dim {
        for j in 0..=i {
            out.push(if i == j { l[(i, j)].ln() } else { l[(i, j)] });
        }
    }
    out
}

/// `Σ_i (r − i + 2)·log L_ii` with 1-based `i`.
fn log_volume(coords: &[f64], dim: usize) -> f64 {
    (0..dim)
        .map(|i| {
            let diag = i * (i + 1) / 2 + i;
            (dim - i + 1) as f64 * coords[diag]
        })
        .sum()
}

impl LogTarget for LogCholeskyMgig<'_> {
    type State = Vec<f64>;

    fn log_density(&self, coords: &Vec<f64>) -> f64 {
        let dim = self.params.dim();
        let Ok(x) = SpdMatrix::from_cholesky_factor(factor_from_coords(coords, dim)) else {
            return f64::NEG_INFINITY;
        };
        match mgig_logpdf_unnorm(self.params, &x) {
            Ok(v) if v.is_finite() => v + log_volume(coords, dim),
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Draws plus the diagnostics that decide the convergence flag.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<SpdMatrix>,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    /// Step scale in use after adaptation.
    pub step_scale: f64,
    /// ESS of the `logdet` trace divided by the number of draws.
    pub ess_per_draw: f64,
    pub converged: bool,
}

impl ChainOutput {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                acceptance: self.acceptance_rate,
                ess_per_draw: self.ess_per_draw,
            })
        }
    }
}

pub const MIN_ACCEPTANCE: f64 = 0.05;
pub const MAX_ACCEPTANCE: f64 = 0.9;
pub const MIN_ESS_PER_DRAW: f64 = 0.01;

/// `n` thinned post-burn-in draws from MGIG, starting at the identity.
pub fn mgig_mh_sample(p: &MgigParams, cfg: &ChainConfig, n: usize, stream: &RngStream) -> Result<ChainOutput> {
    mgig_mh_sample_from(p, cfg, n, stream, &SpdMatrix::identity(p.dim()))
}

pub fn mgig_mh_sample_from(
    p: &MgigParams,
    cfg: &ChainConfig,
    n: usize,
    stream: &RngStream,
    start: &SpdMatrix,
) -> Result<ChainOutput> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidParams("need at least one draw"));
    }
    let dim = p.dim();
    let target = LogCholeskyMgig::new(p);
    let mut rng = stream.rng();
    let mut state = coords_from_spd(start);
    let mut log_density = target.log_density(&state);
    if !log_density.is_finite() {
        return Err(Error::Domain("starting point has zero target density"));
    }

    let mut log_scale = cfg.step_scale.ln();
    for t in 0..cfg.burn_in {
        let walk = GaussianWalk { scale: log_scale.exp() };
        let accepted = metropolis_step(&target, &walk, &mut state, &mut log_density, &mut rng);
        if cfg.adapt {
            let gain = 1.0 / ((t + 1) as f64).powf(0.6);
            log_scale += gain * (f64::from(u8::from(accepted)) - cfg.target_accept);
        }
    }

    let walk = GaussianWalk { scale: log_scale.exp() };
    let mut draws = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut accepted = 0usize;
    for _ in 0..n {
        for _ in 0..cfg.thin {
            if metropolis_step(&target, &walk, &mut state, &mut log_density, &mut rng) {
                accepted += 1;
            }
        }
        let x = SpdMatrix::from_cholesky_factor(factor_from_coords(&state, dim))?;
        trace.push(x.logdet());
        draws.push(x);
    }
    let acceptance_rate = accepted as f64 / (n * cfg.thin) as f64;
    let ess_per_draw = effective_sample_size(&trace) / n as f64;
    let converged = (MIN_ACCEPTANCE..=MAX_ACCEPTANCE).contains(&acceptance_rate) && ess_per_draw >= MIN_ESS_PER_DRAW;
    Ok(ChainOutput {
        draws,
        acceptance_rate,
        step_scale: walk.scale,
        ess_per_draw,
        converged,
    })
}

/// `chains` independent chains started at the identity, each on its own
/// substream of `stream`, contributing `per_chain` draws apiece. With
/// `per_chain = 1` the draws are independent. Diagnostics are pooled:
/// acceptance over all post-burn-in steps and ESS of the concatenated
/// `logdet` trace.
pub fn mgig_mh_chains<R: TrialRunner>(
    p: &MgigParams,
    cfg: &ChainConfig,
    chains: usize,
    per_chain: usize,
    stream: &RngStream,
    runner: &R,
) -> Result<ChainOutput> {
    if chains == 0 || per_chain == 0 {
        return Err(Error::InvalidParams("need at least one chain and one draw"));
    }
    let outputs = runner.map(chains, |c| {
        mgig_mh_sample(p, cfg, per_chain, &stream.substream(c as u64))
    });
    let mut draws = Vec::with_capacity(chains * per_chain);
    let mut acceptance = 0.0;
    let mut scale = 0.0;
    for out in outputs {
        let out = out?;
        acceptance += out.acceptance_rate;
        scale += out.step_scale;
        draws.extend(out.draws);
    }
    let acceptance_rate = acceptance / chains as f64;
    let trace: Vec<f64> = draws.iter().map(|d| d.logdet()).collect();
    let ess_per_draw = effective_sample_size(&trace) / draws.len() as f64;
    let converged = (MIN_ACCEPTANCE..=MAX_ACCEPTANCE).contains(&acceptance_rate) && ess_per_draw >= MIN_ESS_PER_DRAW;
    Ok(ChainOutput {
        draws,
        acceptance_rate,
        step_scale: scale / chains as f64,
        ess_per_draw,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ThreeStates([f64; 3]);

    impl LogTarget for ThreeStates {
        type State = usize;
        fn log_density(&self, s: &usize) -> f64 {
            self.0[*s].ln()
        }
    }

    /// Moves to one of the two other states uniformly: symmetric.
    struct OtherState;

    impl SymmetricProposal<usize> for OtherState {
        fn propose<R: Rng + ?Sized>(&self, current: &usize, rng: &mut R) -> usize {
            (current + 1 + rng.random_range(0..2)) % 3
        }
    }

    #[test]
    fn three_state_harness_reaches_target() {
        let weights = [0.2, 0.5, 0.3];
        let target = ThreeStates(weights);
        let mut rng = RngStream::new(2024, 0).rng();
        let mut state = 0usize;
        let mut ld = target.log_density(&state);
        let mut counts = [0usize; 3];
        let steps = 1_000_000;
        for _ in 0..steps {
            metropolis_step(&target, &OtherState, &mut state, &mut ld, &mut rng);
            counts[state] += 1;
        }
        for k in 0..3 {
            let freq = counts[k] as f64 / steps as f64;
            assert!((freq - weights[k]).abs() <= 0.02 * weights[k], "state {k}: {freq}");
        }
    }

    #[test]
    fn coordinates_round_trip() {
        let x = SpdMatrix::new(crate::spd::SymMatrix::from_row_major(2, &[2.0, 0.3, 0.3, 1.0]).unwrap()).unwrap();
        let c = coords_from_spd(&x);
        let back = SpdMatrix::from_cholesky_factor(factor_from_coords(&c, 2)).unwrap();
        assert!(back.base().sub(x.base()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn log_volume_matches_scalar_jacobian() {
        // r = 1: x = e^{2θ}, dx/dθ = 2x, so log|J| = 2θ + log 2.
        assert_eq!(log_volume(&[0.7], 1), 2.0 * 0.7);
    }

    #[test]
    fn log_volume_matches_finite_difference_jacobian() {
        // r = 2: compare with the determinant of d(packed x)/d(coords).
        let coords = [0.3, -0.4, -0.2];
        let f = |c: &[f64]| {
            let l = factor_from_coords(c, 2);
            let x = &l * l.transpose();
            [x[(0, 0)], x[(1, 0)], x[(1, 1)]]
        };
        let h = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(3, 3);
        for k in 0..3 {
            let mut up = coords;
            let mut dn = coords;
            up[k] += h;
            dn[k] -= h;
            let (fu, fd) = (f(&up), f(&dn));
            for i in 0..3 {
                jac[(i, k)] = (fu[i] - fd[i]) / (2.0 * h);
            }
        }
        let log_det = jac.determinant().abs().ln();
        // constant r·log 2 dropped in log_volume
        let expected = log_volume(&coords, 2) + 2.0 * 2.0f64.ln();
        assert!((log_det - expected).abs() < 1e-8, "{log_det} vs {expected}");
    }

    #[test]
    fn vanishing_step_barely_moves() {
        let p = MgigParams::new(2.0, SpdMatrix::identity(2), SpdMatrix::identity(2)).unwrap();
        let cfg = ChainConfig {
            burn_in: 0,
            thin: 1,
            step_scale: 1e-9,
            target_accept: 0.3,
            adapt: false,
        };
        let out = mgig_mh_sample(&p, &cfg, 500, &RngStream::new(1, 1)).unwrap();
        assert!(out.acceptance_rate > 0.99);
        for d in &out.draws {
            assert!(d.base().sub(&crate::spd::SymMatrix::identity(2)).unwrap().max_abs() < 1e-6);
        }
        // Sticky chains are flagged.
        assert!(!out.converged);
        assert!(matches!(out.require_converged(), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn identical_streams_give_identical_chains() {
        let p = MgigParams::new(0.5, SpdMatrix::identity(2), SpdMatrix::identity(2)).unwrap();
        let cfg = ChainConfig::default();
        let a = mgig_mh_sample(&p, &cfg, 50, &RngStream::new(8, 2)).unwrap();
        let b = mgig_mh_sample(&p, &cfg, 50, &RngStream::new(8, 2)).unwrap();
        assert_eq!(a.draws, b.draws);
    }

    #[test]
    fn default_chain_converges() {
        let p = MgigParams::new(2.0, SpdMatrix::identity(2), SpdMatrix::identity(2)).unwrap();
        let out = mgig_mh_sample(&p, &ChainConfig::default(), 2000, &RngStream::new(3, 0)).unwrap();
        assert!(out.converged, "acc {} ess {}", out.acceptance_rate, out.ess_per_draw);
    }

    #[test]
    fn pooled_chains() {
        let p = MgigParams::new(1.0, SpdMatrix::identity(2), SpdMatrix::identity(2)).unwrap();
        let cfg = ChainConfig {
            burn_in: 500,
            ..ChainConfig::default()
        };
        let stream = RngStream::new(4, 4);
        let out = mgig_mh_chains(&p, &cfg, 300, 1, &stream, &crate::campaign::Sequential).unwrap();
        assert_eq!(out.draws.len(), 300);
        assert!(out.converged);
        let first = mgig_mh_sample(&p, &cfg, 1, &stream.substream(0)).unwrap();
        assert_eq!(out.draws[0], first.draws[0]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ChainConfig::default();
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
        cfg = ChainConfig {
            target_accept: 1.0,
            ..ChainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
