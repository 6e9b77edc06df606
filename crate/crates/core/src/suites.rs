//! Deterministic verification suites for the maps and for the step-by-step
//! Yang–Baxter composition.
//!
//! Inputs are Wishart draws filtered by condition number. Pair `i` of
//! dimension `r` in suite `s` comes from its own substream, so every
//! parameter setting sees the same inputs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::campaign::{Check, ResidualStats, TrialRunner, VerificationReport};
use crate::distributions::{random_spd, RngStream};
use crate::error::{Error, Result};
use crate::maps::{
    cone_candidate, derivative_identities_check, gig1_map, h3b, phi, phi_jacobian_fd, psi, psi_affine,
    psi_jacobian_check, scaling_residual, theta, MapParams, SpdPair,
};
use crate::numerics::relative_diff;
use crate::spd::SymMatrix;
use crate::yangbaxter::{appendix_trace, SpdTriple, YbParams};

pub const MAPS_STREAM: u64 = 0x4d41;
pub const APPENDIX_STREAM: u64 = 0x4150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapsSection {
    Involution,
    Forms,
    Jacobian,
    Derivatives,
    Cone,
}

impl MapsSection {
    pub const ALL: [MapsSection; 5] = [
        MapsSection::Involution,
        MapsSection::Forms,
        MapsSection::Jacobian,
        MapsSection::Derivatives,
        MapsSection::Cone,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MapsSection::Involution => "involution",
            MapsSection::Forms => "forms",
            MapsSection::Jacobian => "jacobian",
            MapsSection::Derivatives => "derivatives",
            MapsSection::Cone => "cone",
        }
    }

    fn tag(&self) -> u64 {
        *self as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapsTolerances {
    pub involution: f64,
    pub scalar_reduction: f64,
    pub dual_form: f64,
    pub scaling: f64,
    pub jacobian: f64,
    pub finite_difference: f64,
    pub algebraic: f64,
    pub cone: f64,
}

impl Default for MapsTolerances {
    fn default() -> Self {
        MapsTolerances {
            involution: 1e-10,
            scalar_reduction: 1e-14,
            dual_form: 1e-12,
            scaling: 1e-12,
            jacobian: 1e-4,
            finite_difference: 1e-5,
            algebraic: 1e-11,
            cone: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapsSuiteConfig {
    pub dims: Vec<usize>,
    pub params: Vec<MapParams>,
    pub sections: Vec<MapsSection>,
    pub seed: u64,
    pub max_condition: f64,
    pub involution_pairs: usize,
    pub forms_pairs: usize,
    pub jacobian_pairs: usize,
    pub derivative_pairs: usize,
    pub cone_pairs: usize,
    pub tolerances: MapsTolerances,
}

impl MapsSuiteConfig {
    pub fn new(dims: Vec<usize>, params: Vec<MapParams>, seed: u64) -> Self {
        MapsSuiteConfig {
            dims,
            params,
            sections: MapsSection::ALL.to_vec(),
            seed,
            max_condition: 1e4,
            involution_pairs: 1000,
            forms_pairs: 200,
            jacobian_pairs: 50,
            derivative_pairs: 50,
            cone_pairs: 200,
            tolerances: MapsTolerances::default(),
        }
    }

    pub fn only(mut self, section: MapsSection) -> Self {
        self.sections = alloc::vec![section];
        self
    }

    fn pairs(&self, s: MapsSection) -> usize {
        match s {
            MapsSection::Involution => self.involution_pairs,
            MapsSection::Forms => self.forms_pairs,
            MapsSection::Jacobian => self.jacobian_pairs,
            MapsSection::Derivatives => self.derivative_pairs,
            MapsSection::Cone => self.cone_pairs,
        }
    }
}

/// Residual statistics of one named quantity in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCell {
    pub section: String,
    pub quantity: String,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub tolerance: f64,
    pub stats: ResidualStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub cells: Vec<SuiteCell>,
    pub report: VerificationReport,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }

    /// Largest residual of `quantity` across cells.
    pub fn max_of(&self, quantity: &str) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.quantity == quantity)
            .map(|c| c.stats.max)
            .reduce(|a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
    }
}

fn input_stream(seed: u64, ns: u64, tag: u64, dim: usize, index: usize) -> RngStream {
    RngStream::new(seed, ns).substream((tag << 48) ^ ((dim as u64) << 32) ^ index as u64)
}

fn random_pair(cfg: &MapsSuiteConfig, tag: u64, dim: usize, index: usize) -> (SpdPair, RngStream) {
    let s = input_stream(cfg.seed, MAPS_STREAM, tag, dim, index);
    let mut rng = s.rng();
    let x = random_spd(dim, cfg.max_condition, &mut rng);
    let y = random_spd(dim, cfg.max_condition, &mut rng);
    (SpdPair { first: x, second: y }, s.substream(1))
}

type Measured = Vec<(&'static str, f64, f64)>;

fn measure(cfg: &MapsSuiteConfig, section: MapsSection, p: MapParams, dim: usize, index: usize) -> Result<Measured> {
    let t = &cfg.tolerances;
    let (xy, extra) = random_pair(cfg, section.tag(), dim, index);
    let mut out: Measured = Vec::new();
    match section {
        MapsSection::Involution => {
            let back = phi(p, &phi(p, &xy)?)?;
            out.push(("phi_involution", back.relative_distance(&xy)?, t.involution));
            if p.alpha > 0.0 || p.beta > 0.0 {
                let back = psi(p, &psi(p, &xy)?)?;
                out.push(("psi_involution", back.relative_distance(&xy)?, t.involution));
            }
        }
        MapsSection::Forms => {
            if dim == 1 {
                let (x, y) = (xy.first.base().get(0, 0), xy.second.base().get(0, 0));
                let uv = phi(p, &xy)?;
                let (u, v) = h3b(p, x, y)?;
                let d = relative_diff(uv.first.base().get(0, 0), u).max(relative_diff(uv.second.base().get(0, 0), v));
                out.push(("phi_vs_scalar", d, t.scalar_reduction));
                if p.alpha > 0.0 || p.beta > 0.0 {
                    let uv = psi(p, &xy)?;
                    let (u, v) = gig1_map(p, x, y)?;
                    let d =
                        relative_diff(uv.first.base().get(0, 0), u).max(relative_diff(uv.second.base().get(0, 0), v));
                    out.push(("psi_vs_scalar", d, t.scalar_reduction));
                }
            }
            if p.alpha > 0.0 {
                let d = psi(p, &xy)?.relative_distance(&psi_affine(p, &xy)?)?;
                out.push(("psi_affine_form", d, t.dual_form));
            }
            if p.alpha > 0.0 || p.beta > 0.0 {
                let conj = theta(&phi(p, &theta(&xy)?)?)?;
                out.push((
                    "psi_theta_conjugate",
                    psi(p, &xy)?.relative_distance(&conj)?,
                    t.dual_form,
                ));
            }
            let c = 0.25 + 3.0 * extra.rng().random::<f64>();
            out.push(("scaling_law", scaling_residual(p, &xy, c)?, t.scaling));
        }
        MapsSection::Jacobian => {
            let det = phi_jacobian_fd(p, &xy, None)?;
            out.push(("phi_jacobian", (det - 1.0).abs(), t.jacobian));
            if p.alpha > 0.0 || p.beta > 0.0 {
                let (fd, closed) = psi_jacobian_check(p, &xy, None)?;
                out.push(("psi_jacobian", relative_diff(fd, closed), t.jacobian));
            }
        }
        MapsSection::Derivatives => {
            let mut rng = extra.rng();
            let h = SymMatrix::from_lower_fn(dim, |_, _| rng.sample(StandardNormal));
            let rep = derivative_identities_check(p, &xy, &h)?;
            out.push((
                "finite_difference_identities",
                rep.max_fd_residual(),
                t.finite_difference,
            ));
            out.push(("algebraic_identities", rep.max_algebraic_residual(), t.algebraic));
        }
        MapsSection::Cone => {
            let d = cone_candidate(p, &xy)?.relative_distance(&phi(p, &xy)?)?;
            out.push(("cone_vs_phi", d, t.cone));
        }
    }
    Ok(out)
}

/// Groups per-trial measurements into cells and checks.
fn collect(
    section: &str,
    dim: usize,
    p: MapParams,
    results: Vec<Result<Measured>>,
    cells: &mut Vec<SuiteCell>,
    report: &mut VerificationReport,
) {
    let mut names: Vec<(&'static str, f64, Vec<f64>)> = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(values) => {
                for (name, v, tol) in values {
                    match names.iter_mut().find(|e| e.0 == name) {
                        Some(e) => e.2.push(v),
                        None => names.push((name, tol, alloc::vec![v])),
                    }
                }
            }
            Err(e) => report.fail(format!(
                "{section}/r{dim}/alpha{}_beta{}/trial{i}: {e}",
                p.alpha, p.beta
            )),
        }
    }
    for (name, tol, values) in names {
        let stats = ResidualStats::from_values(&values);
        report.push(Check::at_most(
            format!("{section}/{name}/r{dim}/alpha{}_beta{}", p.alpha, p.beta),
            stats.max,
            tol,
        ));
        cells.push(SuiteCell {
            section: section.into(),
            quantity: name.into(),
            dim,
            alpha: p.alpha,
            beta: p.beta,
            tolerance: tol,
            stats,
        });
    }
}

pub fn maps_suite<R: TrialRunner>(cfg: &MapsSuiteConfig, runner: &R) -> Result<SuiteReport> {
    if cfg.dims.contains(&0) || cfg.params.is_empty() {
        return Err(Error::InvalidParams(
            "maps suite needs positive dims and at least one parameter pair",
        ));
    }
    let mut cells = Vec::new();
    let mut report = VerificationReport::new();
    for &section in &cfg.sections {
        let n = cfg.pairs(section);
        for &dim in &cfg.dims {
            for &p in &cfg.params {
                let results = runner.map(n, |i| measure(cfg, section, p, dim, i));
                collect(section.name(), dim, p, results, &mut cells, &mut report);
            }
        }
    }
    Ok(SuiteReport {
        seed: cfg.seed,
        cells,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixConfig {
    pub dims: Vec<usize>,
    pub params: Vec<YbParams>,
    pub triples: usize,
    pub seed: u64,
    pub max_condition: f64,
    pub tolerance: f64,
}

impl AppendixConfig {
    pub fn new(seed: u64) -> Self {
        let p = |a, b, g| YbParams {
            alpha: a,
            beta: b,
            gamma: g,
        };
        AppendixConfig {
            dims: alloc::vec![1, 2, 3],
            params: alloc::vec![p(2.0, 1.0, 0.5), p(1.0, 0.0, 2.0), p(0.3, 0.3, 5.0), p(1.5, 0.7, 1.5)],
            triples: 200,
            seed,
            max_condition: 1e4,
            tolerance: 1e-10,
        }
    }
}

fn appendix_measure(cfg: &AppendixConfig, p: &YbParams, dim: usize, index: usize) -> Result<Vec<(String, f64)>> {
    let mut rng = input_stream(cfg.seed, APPENDIX_STREAM, 1, dim, index).rng();
    let t = SpdTriple::random(dim, cfg.max_condition, &mut rng);
    let trace = appendix_trace(p, &t)?;
    let mut out: Vec<(String, f64)> = ["x3", "y3", "z3"]
        .iter()
        .zip(trace.residuals)
        .map(|(n, r)| (String::from(*n), r))
        .collect();
    out.extend(trace.auxiliary.into_iter().map(|a| (a.name, a.residual)));
    Ok(out)
}

/// Both composition chains on random triples, with every auxiliary identity.
pub fn appendix_campaign<R: TrialRunner>(cfg: &AppendixConfig, runner: &R) -> Result<SuiteReport> {
    if cfg.triples == 0 || cfg.dims.contains(&0) {
        return Err(Error::InvalidParams(
            "appendix campaign needs triples and positive dims",
        ));
    }
    let mut cells = Vec::new();
    let mut report = VerificationReport::new();
    for &dim in &cfg.dims {
        for p in &cfg.params {
            let label = format!("r{dim}/alpha{}_beta{}_gamma{}", p.alpha, p.beta, p.gamma);
            let results = runner.map(cfg.triples, |i| appendix_measure(cfg, p, dim, i));
            let mut names: Vec<(String, Vec<f64>)> = Vec::new();
            for (i, r) in results.into_iter().enumerate() {
                match r {
                    Ok(values) => {
                        for (name, v) in values {
                            match names.iter_mut().find(|e| e.0 == name) {
                                Some(e) => e.1.push(v),
                                None => names.push((name, alloc::vec![v])),
                            }
                        }
                    }
                    Err(e) => report.fail(format!("appendix/{label}/trial{i}: {e}")),
                }
            }
            for (name, values) in names {
                let stats = ResidualStats::from_values(&values);
                report.push(Check::at_most(
                    format!("appendix/{name}/{label}"),
                    stats.max,
                    cfg.tolerance,
                ));
                cells.push(SuiteCell {
                    section: String::from("appendix"),
                    quantity: name,
                    dim,
                    alpha: p.alpha,
                    beta: p.beta,
                    tolerance: cfg.tolerance,
                    stats,
                });
            }
        }
    }
    Ok(SuiteReport {
        seed: cfg.seed,
        cells,
        report,
    })
}
