//! Monte Carlo campaigns for the two independence properties.
//!
//! Each campaign samples `(X, Y)` from the input laws, pushes the draws
//! through the map and runs three tests: distance correlation of `(U, V)`
//! and energy tests of each output marginal against a fresh reference
//! sample. The three share the level by Bonferroni. Scalar campaigns use
//! exact samplers; matrix campaigns use Wishart draws and pooled
//! independent Metropolis chains.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{
    distance_correlation, energy_distance_test, BatchManifest, IndependenceReport, SampleBatch, TransportOutcome,
};
use crate::campaign::{Check, TrialRunner, VerificationReport};
use crate::distributions::{mgig_mh_chains, ChainConfig, MgigParams, RngStream, ScalarLaw, WishartParams};
use crate::error::{Error, Result};
use crate::maps::{my_map, phi, MapParams, SpdPair};
use crate::spd::SpdMatrix;
use crate::stats::density_transport_check;

pub const DIREC_STREAM: u64 = 0x4449;
pub const MY_STREAM: u64 = 0x4d59;

/// Substream indices inside a campaign namespace.
mod slot {
    pub const X: u64 = 0;
    pub const Y: u64 = 1;
    pub const U_REF: u64 = 2;
    pub const V_REF: u64 = 3;
    pub const DCOR: u64 = 4;
    pub const ENERGY_U: u64 = 5;
    pub const ENERGY_V: u64 = 6;
    pub const CONTROL_X: u64 = 7;
    pub const CONTROL_Y: u64 = 8;
    pub const CONTROL_TEST: u64 = 9;
}

/// `MGIG(λ, a, b)` where either coefficient may be absent, which gives the
/// Wishart (`b = 0`) and inverse-Wishart (`a = 0`) laws.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientLaw {
    pub lambda: f64,
    pub a: Option<SpdMatrix>,
    pub b: Option<SpdMatrix>,
}

impl CoefficientLaw {
    /// `MGIG(λ, s·a, t·b)`; a zero scale drops the coefficient.
    pub fn scaled(lambda: f64, s: f64, a: &SpdMatrix, t: f64, b: &SpdMatrix) -> Result<CoefficientLaw> {
        let part = |c: f64, m: &SpdMatrix| -> Result<Option<SpdMatrix>> {
            if c == 0.0 {
                Ok(None)
            } else {
                Ok(Some(SpdMatrix::new(m.base().scaled(c))?))
            }
        };
        Ok(CoefficientLaw {
            lambda,
            a: part(s, a)?,
            b: part(t, b)?,
        })
    }

    fn dim(&self) -> usize {
        self.a.as_ref().or(self.b.as_ref()).map_or(0, |m| m.dim())
    }

    pub fn describe(&self) -> String {
        let c = |m: &Option<SpdMatrix>| m.as_ref().map_or(alloc::vec![], |m| m.base().packed().to_vec());
        format!("lambda={} a={:?} b={:?}", self.lambda, c(&self.a), c(&self.b))
    }

    fn sampler_name(&self) -> &'static str {
        match (self.dim(), &self.a, &self.b) {
            (1, _, _) => "scalar-exact",
            (_, Some(_), Some(_)) => "mgig-mh",
            (_, Some(_), None) => "wishart",
            _ => "inverse-wishart",
        }
    }

    /// `n` draws. Matrix MGIG laws use `chains` pooled Metropolis chains.
    pub fn sample<R: TrialRunner>(
        &self,
        n: usize,
        stream: &RngStream,
        chain: &ChainConfig,
        chains: usize,
        runner: &R,
    ) -> Result<Vec<SpdMatrix>> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::InvalidParams("law needs at least one coefficient"));
        }
        let coef = |m: &Option<SpdMatrix>| m.as_ref().map_or(0.0, |m| m.base().get(0, 0));
        if dim == 1 {
            let law = ScalarLaw::from_coefficients(self.lambda, coef(&self.a), coef(&self.b))?;
            let mut rng = stream.rng();
            return (0..n).map(|_| SpdMatrix::from_diag(&[law.sample(&mut rng)])).collect();
        }
        match (&self.a, &self.b) {
            (Some(a), Some(b)) => {
                let p = MgigParams::new(self.lambda, a.clone(), b.clone())?;
                let chains = chains.max(1);
                let per_chain = n.div_ceil(chains);
                let mut out = mgig_mh_chains(&p, chain, chains, per_chain, stream, runner)?.require_converged()?;
                out.draws.truncate(n);
                Ok(out.draws)
            }
            (Some(a), None) => wishart_draws(self.lambda, a, n, stream, false),
            (None, Some(b)) => wishart_draws(-self.lambda, b, n, stream, true),
            (None, None) => unreachable!(),
        }
    }
}

fn wishart_draws(lambda: f64, c: &SpdMatrix, n: usize, stream: &RngStream, invert: bool) -> Result<Vec<SpdMatrix>> {
    let w = WishartParams::new(lambda, c.clone())?;
    if !w.has_density() {
        return Err(Error::InvalidLambda { lambda, dim: c.dim() });
    }
    let mut rng = stream.rng();
    (0..n)
        .map(|_| {
            let d = w.sample(&mut rng).into_spd().ok_or(Error::NotSpd)?;
            if invert {
                d.inverse()
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// Sizes and levels shared by both campaigns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n: usize,
    pub permutations: usize,
    /// Permutations for the negative control; `1999` allows `p < 0.001`.
    pub control_permutations: usize,
    pub level: f64,
    /// Required p-value of a negative control.
    pub control_level: f64,
    pub seed: u64,
    pub chain: ChainConfig,
    pub chains: usize,
    pub run_control: bool,
}

impl McSettings {
    pub fn new(seed: u64) -> McSettings {
        McSettings {
            n: 20_000,
            permutations: 999,
            control_permutations: 1999,
            level: 0.01,
            control_level: 0.001,
            seed,
            chain: ChainConfig::default(),
            chains: 8,
            run_control: true,
        }
    }

    /// Per-test level after Bonferroni over the three sub-tests.
    pub fn test_level(&self) -> f64 {
        self.level / 3.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirecConfig {
    pub lambda: f64,
    pub params: MapParams,
    pub a: SpdMatrix,
    pub b: SpdMatrix,
    pub mc: McSettings,
    /// Number of sampled pairs fed to the deterministic transport check.
    pub transport_pairs: usize,
    pub transport_tolerance: f64,
    /// The control samples `X` with `α` multiplied by this factor.
    pub mutation_factor: f64,
}

impl DirecConfig {
    pub fn new(lambda: f64, params: MapParams, a: SpdMatrix, b: SpdMatrix, seed: u64) -> Result<DirecConfig> {
        crate::spd::check_dims(a.dim(), b.dim())?;
        Ok(DirecConfig {
            lambda,
            params,
            a,
            b,
            mc: McSettings::new(seed),
            transport_pairs: 1000,
            transport_tolerance: 1e-9,
            mutation_factor: 2.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MyConfig {
    pub lambda: f64,
    pub a: SpdMatrix,
    pub b: SpdMatrix,
    pub mc: McSettings,
}

impl MyConfig {
    pub fn new(lambda: f64, a: SpdMatrix, b: SpdMatrix, seed: u64) -> Result<MyConfig> {
        crate::spd::check_dims(a.dim(), b.dim())?;
        Ok(MyConfig {
            lambda,
            a,
            b,
            mc: McSettings::new(seed),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCampaignReport {
    pub campaign: String,
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub level: f64,
    pub test_level: f64,
    pub independence: Option<IndependenceReport>,
    pub marginal_u: Option<IndependenceReport>,
    pub marginal_v: Option<IndependenceReport>,
    pub transport: Option<TransportOutcome>,
    pub control: Option<IndependenceReport>,
    pub report: VerificationReport,
}

impl McCampaignReport {
    fn empty(campaign: &str, dim: usize, mc: &McSettings) -> Self {
        McCampaignReport {
            campaign: campaign.into(),
            dim,
            n: mc.n,
            seed: mc.seed,
            level: mc.level,
            test_level: mc.test_level(),
            independence: None,
            marginal_u: None,
            marginal_v: None,
            transport: None,
            control: None,
            report: VerificationReport::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

struct Draws<'a, R> {
    mc: &'a McSettings,
    ns: RngStream,
    runner: &'a R,
}

impl<R: TrialRunner> Draws<'_, R> {
    fn stream(&self, slot: u64) -> RngStream {
        self.ns.substream(slot)
    }

    fn sample(&self, law: &CoefficientLaw, slot: u64) -> Result<Vec<SpdMatrix>> {
        law.sample(
            self.mc.n,
            &self.stream(slot),
            &self.mc.chain,
            self.mc.chains,
            self.runner,
        )
    }

    fn batch(&self, draws: &[SpdMatrix], sampler: &str, params: String, slot: u64) -> Result<SampleBatch> {
        let s = self.stream(slot);
        SampleBatch::from_matrices(
            draws,
            BatchManifest {
                sampler: sampler.into(),
                params,
                seed: s.seed,
                stream_id: s.stream_id,
            },
        )
    }

    fn reference(&self, law: &CoefficientLaw, slot: u64) -> Result<SampleBatch> {
        let d = self.sample(law, slot)?;
        self.batch(&d, law.sampler_name(), law.describe(), slot)
    }

    fn push_forward(
        &self,
        xs: &[SpdMatrix],
        ys: &[SpdMatrix],
        map: impl Fn(&SpdPair) -> Result<SpdPair> + Sync + Send,
    ) -> Result<(Vec<SpdMatrix>, Vec<SpdMatrix>)> {
        let out = self.runner.map(xs.len(), |i| {
            map(&SpdPair {
                first: xs[i].clone(),
                second: ys[i].clone(),
            })
        });
        let mut us = Vec::with_capacity(xs.len());
        let mut vs = Vec::with_capacity(xs.len());
        for r in out {
            let p = r?;
            us.push(p.first);
            vs.push(p.second);
        }
        Ok((us, vs))
    }

    /// Independence plus both marginals, recorded into `rep`.
    fn main_tests(
        &self,
        us: &[SpdMatrix],
        vs: &[SpdMatrix],
        u_law: &CoefficientLaw,
        v_law: &CoefficientLaw,
        rep: &mut McCampaignReport,
    ) -> Result<()> {
        let level = self.mc.test_level();
        let u = self.batch(us, "pushforward", String::from("u"), slot::X)?;
        let v = self.batch(vs, "pushforward", String::from("v"), slot::Y)?;
        let dcor = distance_correlation(
            &u,
            &v,
            self.mc.permutations,
            &self.stream(slot::DCOR),
            level,
            self.runner,
        )?;
        let u_ref = self.reference(u_law, slot::U_REF)?;
        let v_ref = self.reference(v_law, slot::V_REF)?;
        let eu = energy_distance_test(
            &u,
            &u_ref,
            self.mc.permutations,
            &self.stream(slot::ENERGY_U),
            level,
            self.runner,
        )?;
        let ev = energy_distance_test(
            &v,
            &v_ref,
            self.mc.permutations,
            &self.stream(slot::ENERGY_V),
            level,
            self.runner,
        )?;
        for (name, r) in [("independence", &dcor), ("marginal_u", &eu), ("marginal_v", &ev)] {
            rep.report
                .push(Check::above(format!("{name}/p_value"), r.p_value, level));
        }
        rep.independence = Some(dcor);
        rep.marginal_u = Some(eu);
        rep.marginal_v = Some(ev);
        Ok(())
    }
}

fn record_error(rep: &mut McCampaignReport, stage: &str, e: Error) {
    rep.report.fail(format!("{stage}: {e}"));
}

/// Monte Carlo check that `φ` maps `MGIG(λ, αa, b) ⊗ MGIG(λ, βb, a)` to
/// `MGIG(λ, αb, a) ⊗ MGIG(λ, βa, b)`. Errors are recorded in the report.
pub fn direc_campaign<R: TrialRunner>(cfg: &DirecConfig, runner: &R) -> McCampaignReport {
    let dim = cfg.a.dim();
    let mut rep = McCampaignReport::empty("direc", dim, &cfg.mc);
    if let Err(e) = direc_inner(cfg, runner, &mut rep) {
        record_error(&mut rep, "direc", e);
    }
    rep
}

fn direc_inner<R: TrialRunner>(cfg: &DirecConfig, runner: &R, rep: &mut McCampaignReport) -> Result<()> {
    let p = cfg.params;
    let (l, a, b) = (cfg.lambda, &cfg.a, &cfg.b);
    let x_law = CoefficientLaw::scaled(l, p.alpha, a, 1.0, b)?;
    let y_law = CoefficientLaw::scaled(l, p.beta, b, 1.0, a)?;
    let u_law = CoefficientLaw::scaled(l, p.alpha, b, 1.0, a)?;
    let v_law = CoefficientLaw::scaled(l, p.beta, a, 1.0, b)?;
    let d = Draws {
        mc: &cfg.mc,
        ns: RngStream::new(cfg.mc.seed, DIREC_STREAM).substream(a.dim() as u64),
        runner,
    };
    let xs = d.sample(&x_law, slot::X)?;
    let ys = d.sample(&y_law, slot::Y)?;

    let k = cfg.transport_pairs.min(xs.len());
    if k > 0 {
        let pairs: Vec<SpdPair> = (0..k)
            .map(|i| SpdPair {
                first: xs[i].clone(),
                second: ys[i].clone(),
            })
            .collect();
        let t = density_transport_check(l, a, b, p, &pairs)?;
        rep.report.push(Check::at_most(
            "transport/residual",
            t.residual,
            cfg.transport_tolerance,
        ));
        rep.transport = Some(t);
    }

    let (us, vs) = d.push_forward(&xs, &ys, |pair| phi(p, pair))?;
    d.main_tests(&us, &vs, &u_law, &v_law, rep)?;

    if cfg.mc.run_control {
        let bad_law = CoefficientLaw::scaled(l, p.alpha * cfg.mutation_factor, a, 1.0, b)?;
        let bad_x = d.sample(&bad_law, slot::CONTROL_X)?;
        let (bad_u, _) = d.push_forward(&bad_x, &ys, |pair| phi(p, pair))?;
        let u = d.batch(
            &bad_u,
            "pushforward",
            String::from("u under mutated input"),
            slot::CONTROL_X,
        )?;
        let u_ref = d.reference(&u_law, slot::U_REF)?;
        let c = energy_distance_test(
            &u,
            &u_ref,
            cfg.mc.control_permutations,
            &d.stream(slot::CONTROL_TEST),
            cfg.mc.control_level,
            runner,
        )?;
        rep.report.push(Check::below(
            "mutation_control/p_value",
            c.p_value,
            cfg.mc.control_level,
        ));
        rep.control = Some(c);
    }
    Ok(())
}

/// Monte Carlo check of the Matsumoto–Yor property:
/// `X ~ MGIG(−λ, a, b)`, `Y ~ W(λ, a)` give independent
/// `U = (X+Y)⁻¹ ~ MGIG(−λ, b, a)` and `V = X⁻¹ − (X+Y)⁻¹ ~ W(λ, b)`.
/// The negative control swaps the two input laws.
pub fn my_property_campaign<R: TrialRunner>(cfg: &MyConfig, runner: &R) -> McCampaignReport {
    let dim = cfg.a.dim();
    let mut rep = McCampaignReport::empty("my", dim, &cfg.mc);
    if let Err(e) = my_inner(cfg, runner, &mut rep) {
        record_error(&mut rep, "my", e);
    }
    rep
}

fn my_inner<R: TrialRunner>(cfg: &MyConfig, runner: &R, rep: &mut McCampaignReport) -> Result<()> {
    let (l, a, b) = (cfg.lambda, &cfg.a, &cfg.b);
    let x_law = CoefficientLaw::scaled(-l, 1.0, a, 1.0, b)?;
    let y_law = CoefficientLaw::scaled(l, 1.0, a, 0.0, b)?;
    let u_law = CoefficientLaw::scaled(-l, 1.0, b, 1.0, a)?;
    let v_law = CoefficientLaw::scaled(l, 1.0, b, 0.0, a)?;
    let d = Draws {
        mc: &cfg.mc,
        ns: RngStream::new(cfg.mc.seed, MY_STREAM).substream(a.dim() as u64),
        runner,
    };
    let xs = d.sample(&x_law, slot::X)?;
    let ys = d.sample(&y_law, slot::Y)?;
    let (us, vs) = d.push_forward(&xs, &ys, my_map)?;
    d.main_tests(&us, &vs, &u_law, &v_law, rep)?;

    if cfg.mc.run_control {
        let bad_x = d.sample(&y_law, slot::CONTROL_X)?;
        let bad_y = d.sample(&x_law, slot::CONTROL_Y)?;
        let (bu, bv) = d.push_forward(&bad_x, &bad_y, my_map)?;
        let u = d.batch(
            &bu,
            "pushforward",
            String::from("u under swapped inputs"),
            slot::CONTROL_X,
        )?;
        let v = d.batch(
            &bv,
            "pushforward",
            String::from("v under swapped inputs"),
            slot::CONTROL_Y,
        )?;
        let c = distance_correlation(
            &u,
            &v,
            cfg.mc.control_permutations,
            &d.stream(slot::CONTROL_TEST),
            cfg.mc.control_level,
            runner,
        )?;
        rep.report.push(Check::below(
            "negative_control/p_value",
            c.p_value,
            cfg.mc.control_level,
        ));
        rep.control = Some(c);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::Sequential;

    fn scalar(v: f64) -> SpdMatrix {
        SpdMatrix::from_diag(&[v]).unwrap()
    }

    fn small(mc: &mut McSettings, n: usize) {
        mc.n = n;
        mc.permutations = 199;
        mc.control_permutations = 1999;
    }

    #[test]
    fn coefficient_laws_pick_samplers() {
        let a = SpdMatrix::identity(2);
        let w = CoefficientLaw::scaled(2.0, 1.0, &a, 0.0, &a).unwrap();
        assert_eq!(w.sampler_name(), "wishart");
        let iw = CoefficientLaw::scaled(-2.0, 0.0, &a, 1.0, &a).unwrap();
        assert_eq!(iw.sampler_name(), "inverse-wishart");
        let draws = iw
            .sample(5, &RngStream::new(1, 1), &ChainConfig::default(), 1, &Sequential)
            .unwrap();
        assert_eq!(draws.len(), 5);
        // a singular Wishart law has no density and is refused
        let singular = CoefficientLaw::scaled(0.5, 1.0, &SpdMatrix::identity(3), 0.0, &a).unwrap();
        assert!(singular
            .sample(5, &RngStream::new(1, 1), &ChainConfig::default(), 1, &Sequential)
            .is_err());
        let s = CoefficientLaw::scaled(1.0, 1.0, &scalar(2.0), 0.0, &scalar(1.0)).unwrap();
        assert_eq!(s.sampler_name(), "scalar-exact");
    }

    #[test]
    fn scalar_direc_passes_and_control_rejects() {
        let p = MapParams::new(2.0, 0.5).unwrap();
        let mut cfg = DirecConfig::new(0.7, p, scalar(1.2), scalar(0.8), 3).unwrap();
        small(&mut cfg.mc, 4000);
        let rep = direc_campaign(&cfg, &Sequential);
        assert!(rep.passed(), "{:?}", rep.report);
        assert!(rep.transport.unwrap().residual < 1e-9);
    }

    #[test]
    fn equal_parameters_are_trivial() {
        let p = MapParams::new(1.5, 1.5).unwrap();
        let mut cfg = DirecConfig::new(-0.5, p, scalar(1.0), scalar(2.0), 4).unwrap();
        small(&mut cfg.mc, 2000);
        cfg.mc.run_control = false;
        let rep = direc_campaign(&cfg, &Sequential);
        assert!(rep.passed(), "{:?}", rep.report);
    }

    #[test]
    fn scalar_my_passes_and_control_rejects() {
        let mut cfg = MyConfig::new(1.0, scalar(1.0), scalar(1.0), 5).unwrap();
        small(&mut cfg.mc, 4000);
        let rep = my_property_campaign(&cfg, &Sequential);
        assert!(rep.passed(), "{:?}", rep.report);
    }

    #[test]
    fn errors_are_recorded() {
        let p = MapParams::new(1.0, 0.0).unwrap();
        // Y ~ MGIG(λ, 0, a) needs λ < 0
        let mut cfg = DirecConfig::new(0.7, p, scalar(1.0), scalar(1.0), 6).unwrap();
        small(&mut cfg.mc, 200);
        let rep = direc_campaign(&cfg, &Sequential);
        assert!(!rep.passed());
        assert_eq!(rep.report.failures.len(), 1);
    }

    #[test]
    fn matrix_my_smoke() {
        let a = SpdMatrix::identity(2);
        let mut cfg = MyConfig::new(2.0, a.clone(), a, 7).unwrap();
        small(&mut cfg.mc, 400);
        cfg.mc.run_control = false;
        cfg.mc.chains = 4;
        let rep = my_property_campaign(&cfg, &Sequential);
        assert!(rep.report.failures.is_empty(), "{:?}", rep.report);
        assert!(rep.independence.is_some());
    }
}
