use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mgig_core::campaign::{Check, TrialRunner, VerificationReport, DEFAULT_SEED};
use mgig_core::distributions::mcmc::{MAX_ACCEPTANCE, MIN_ACCEPTANCE, MIN_ESS_PER_DRAW};
use mgig_core::distributions::{mgig_mh_chains, ChainConfig, MgigParams, RngStream, ScalarLaw, WishartParams};
use mgig_core::maps::MapParams;
use mgig_core::spd::{SpdMatrix, SymMatrix};
use mgig_core::stats::transport::TransportSetting;
use mgig_core::stats::{
    direc_campaign, my_property_campaign, transport_campaign, DirecConfig, McCampaignReport, McSettings, MyConfig,
    TransportCampaignConfig,
};
use mgig_core::suites::{appendix_campaign, maps_suite, AppendixConfig, MapsSection, MapsSuiteConfig};
use mgig_core::yangbaxter::{yb_campaign, YbCampaignConfig, YbParams};
use rand::distr::Distribution;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::parse_matrix;
use crate::report::{csv_writer, write_file, Report};
use crate::runner::PoolRunner;

/// Stream namespace of the `sample` command.
pub const SAMPLE_STREAM: u64 = 0x5341;

#[derive(Parser, Debug, Clone)]
#[command(
    name = "mgig",
    version,
    about = "Verification campaigns and samplers for the matrix GIG family"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base seed of every random stream.
    #[arg(long, global = true, env = "MGIG_SEED")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON report path. Defaults to stdout, except for `sample`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// CSV path: the table of checks, or the draws for `sample` (stdout
    /// when absent).
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Parametric Yang-Baxter equation on random SPD triples.
    VerifyYb(YbArgs),
    /// Involution, dual forms, Jacobians, derivative identities and the cone candidate.
    VerifyMaps(MapsArgs),
    /// Step-by-step trace of the Yang-Baxter composition.
    VerifyAppendix(AppendixArgs),
    /// Density transport constancy and the univariate functional equation.
    VerifyTransport(TransportArgs),
    /// Draw from a law and write the draws as CSV.
    Sample(SampleArgs),
    /// Monte Carlo independence of (U, V) = phi(X, Y).
    TestDirec(DirecArgs),
    /// Monte Carlo check of the Matsumoto-Yor property.
    TestMy(MyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct YbArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 5])]
    pub dim: Vec<usize>,
    /// With --beta and --gamma, replaces the default parameter grid.
    #[arg(long, requires_all = ["beta", "gamma"])]
    pub alpha: Option<f64>,
    #[arg(long, requires_all = ["alpha", "gamma"])]
    pub beta: Option<f64>,
    #[arg(long, requires_all = ["alpha", "beta"])]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Tolerance of cells with alpha = beta = gamma.
    #[arg(long, default_value_t = 1e-12)]
    pub equal_tolerance: f64,
    #[arg(long, default_value_t = 1e4)]
    pub max_condition: f64,
    /// Skip the swapped-parameter control.
    #[arg(long)]
    pub no_mutation: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Involution,
    Forms,
    Jacobian,
    Derivatives,
    Cone,
}

impl From<Section> for MapsSection {
    fn from(s: Section) -> MapsSection {
        match s {
            Section::Involution => MapsSection::Involution,
            Section::Forms => MapsSection::Forms,
            Section::Jacobian => MapsSection::Jacobian,
            Section::Derivatives => MapsSection::Derivatives,
            Section::Cone => MapsSection::Cone,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct MapsArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
    pub dim: Vec<usize>,
    #[arg(long, requires = "beta")]
    pub alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub beta: Option<f64>,
    /// Sections to run (default: all).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub section: Vec<Section>,
    /// Pairs per cell in every section.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_condition: Option<f64>,
    /// Involution tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub jacobian_tolerance: Option<f64>,
    #[arg(long)]
    pub fd_tolerance: Option<f64>,
    #[arg(long)]
    pub algebraic_tolerance: Option<f64>,
    #[arg(long)]
    pub cone_tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct AppendixArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
    pub dim: Vec<usize>,
    #[arg(long, requires_all = ["beta", "gamma"])]
    pub alpha: Option<f64>,
    #[arg(long, requires_all = ["alpha", "gamma"])]
    pub beta: Option<f64>,
    #[arg(long, requires_all = ["alpha", "beta"])]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Clone)]
pub struct TransportArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
    pub dim: Vec<usize>,
    /// With --alpha and --beta, replaces the default settings.
    #[arg(long, requires_all = ["alpha", "beta"])]
    pub lambda: Option<f64>,
    #[arg(long, requires_all = ["lambda", "beta"])]
    pub alpha: Option<f64>,
    #[arg(long, requires_all = ["lambda", "alpha"])]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub eff_tolerance: f64,
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
}

#[derive(Args, Debug, Clone)]
pub struct McArgs {
    /// Sample size (default 20000 at dim 1, 1500 above).
    #[arg(long)]
    pub n: Option<usize>,
    /// Permutations per test.
    #[arg(long = "B", default_value_t = 999)]
    pub permutations: usize,
    #[arg(long, default_value_t = 1999)]
    pub control_permutations: usize,
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
    /// Metropolis chains for matrix MGIG laws.
    #[arg(long, default_value_t = 8)]
    pub chains: usize,
    #[arg(long)]
    pub no_control: bool,
}

impl McArgs {
    fn settings(&self, dim: usize, seed: u64) -> McSettings {
        let mut mc = McSettings::new(seed);
        mc.n = self.n.unwrap_or(if dim == 1 { 20_000 } else { 1500 });
        mc.permutations = self.permutations;
        mc.control_permutations = self.control_permutations;
        mc.level = self.level;
        mc.chains = self.chains;
        mc.run_control = !self.no_control;
        mc
    }
}

#[derive(Args, Debug, Clone)]
pub struct DirecArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value = "identity")]
    pub a: String,
    #[arg(long, default_value = "identity")]
    pub b: String,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Args, Debug, Clone)]
pub struct MyArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value = "identity")]
    pub a: String,
    #[arg(long, default_value = "identity")]
    pub b: String,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    /// Scalar GIG with coefficients --a and --b (either may be 0).
    Gig,
    /// Wishart with density ∝ det(x)^{λ−(r+1)/2} e^{−tr(a x)}.
    Wishart,
    /// Matrix GIG by Metropolis-Hastings.
    Mgig,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[arg(value_enum)]
    pub law: Law,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value = "identity")]
    pub a: String,
    #[arg(long, default_value = "identity")]
    pub b: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

/// Result of one command: the report and the CSV artifact.
pub struct Output {
    pub report: Report,
    pub csv: String,
}

pub fn threads(cli: &Cli) -> usize {
    cli.threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs the command without touching the file system.
pub fn run(cli: &Cli) -> anyhow::Result<Output> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let runner = PoolRunner::new(threads(cli))?;
    let start = Instant::now();
    let (mut report, csv) = match &cli.command {
        Command::VerifyYb(a) => (verify_yb(a, seed, &runner)?, None),
        Command::VerifyMaps(a) => (verify_maps(a, seed, &runner)?, None),
        Command::VerifyAppendix(a) => (verify_appendix(a, seed, &runner)?, None),
        Command::VerifyTransport(a) => (verify_transport(a, seed, &runner)?, None),
        Command::TestDirec(a) => (test_direc(a, seed, &runner)?, None),
        Command::TestMy(a) => (test_my(a, seed, &runner)?, None),
        Command::Sample(a) => {
            let (r, csv) = sample(a, seed, &runner)?;
            (r, Some(csv))
        }
    };
    report.runtime.wall_seconds = start.elapsed().as_secs_f64();
    report.runtime.threads = runner.threads();
    let csv = match csv {
        Some(c) => c,
        None => report.results_csv()?,
    };
    Ok(Output { report, csv })
}

/// Runs the command and writes its files. Returns whether every check
/// passed.
pub fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let out = run(cli)?;
    let json = out.report.to_json()?;
    let sampling = matches!(cli.command, Command::Sample(_));
    match &cli.out {
        Some(p) => write_file(p, &json)?,
        None if !sampling => print!("{json}"),
        None => {}
    }
    match &cli.csv {
        Some(p) => write_file(p, &out.csv)?,
        None if sampling => print!("{}", out.csv),
        None => {}
    }
    Ok(out.report.passed)
}

/// Serializes a campaign result without its check list, which the report
/// already carries.
fn details<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("campaign report serializes");
    if let Value::Object(m) = &mut v {
        m.remove("report");
    }
    v
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("config serializes")
}

fn verify_yb<R: TrialRunner>(a: &YbArgs, seed: u64, runner: &R) -> anyhow::Result<Report> {
    let mut cfg = YbCampaignConfig::new(seed);
    cfg.dims = a.dim.clone();
    cfg.trials = a.trials;
    if let (Some(alpha), Some(beta), Some(gamma)) = (a.alpha, a.beta, a.gamma) {
        cfg.params_grid = vec![YbParams::new(alpha, beta, gamma)?];
    }
    cfg.tolerance = a.tolerance;
    cfg.equal_tolerance = a.equal_tolerance;
    cfg.max_condition = a.max_condition;
    if a.no_mutation {
        cfg.mutation = None;
    }
    let out = yb_campaign(&cfg, runner)?;
    let checks = out.report.clone();
    Ok(Report::new("verify-yb", to_value(&cfg), seed, checks, details(&out)))
}

pub fn default_map_params() -> Vec<MapParams> {
    [(1.0, 0.0), (2.0, 1.0), (0.5, 3.0), (1.0, 1.0), (0.0, 1.0)]
        .into_iter()
        .map(|(alpha, beta)| MapParams { alpha, beta })
        .collect()
}

fn verify_maps<R: TrialRunner>(a: &MapsArgs, seed: u64, runner: &R) -> anyhow::Result<Report> {
    let params = match (a.alpha, a.beta) {
        (Some(alpha), Some(beta)) => vec![MapParams::new(alpha, beta)?],
        _ => default_map_params(),
    };
    let mut cfg = MapsSuiteConfig::new(a.dim.clone(), params, seed);
    if !a.section.is_empty() {
        cfg.sections = a.section.iter().map(|&s| s.into()).collect();
    }
    if let Some(n) = a.trials {
        cfg.involution_pairs = n;
        cfg.forms_pairs = n;
        cfg.jacobian_pairs = n;
        cfg.derivative_pairs = n;
        cfg.cone_pairs = n;
    }
    if let Some(k) = a.max_condition {
        cfg.max_condition = k;
    }
    let t = &mut cfg.tolerances;
    for (field, value) in [
        (&mut t.involution, a.tolerance),
        (&mut t.jacobian, a.jacobian_tolerance),
        (&mut t.finite_difference, a.fd_tolerance),
        (&mut t.algebraic, a.algebraic_tolerance),
        (&mut t.cone, a.cone_tolerance),
    ] {
        if let Some(v) = value {
            *field = v;
        }
    }
    let out = maps_suite(&cfg, runner)?;
    let checks = out.report.clone();
    Ok(Report::new("verify-maps", to_value(&cfg), seed, checks, details(&out)))
}

fn verify_appendix<R: TrialRunner>(a: &AppendixArgs, seed: u64, runner: &R) -> anyhow::Result<Report> {
    let mut cfg = AppendixConfig::new(seed);
    cfg.dims = a.dim.clone();
    cfg.triples = a.trials;
    cfg.tolerance = a.tolerance;
    if let (Some(alpha), Some(beta), Some(gamma)) = (a.alpha, a.beta, a.gamma) {
        cfg.params = vec![YbParams::new(alpha, beta, gamma)?];
    }
    let out = appendix_campaign(&cfg, runner)?;
    let checks = out.report.clone();
    Ok(Report::new(
        "verify-appendix",
        to_value(&cfg),
        seed,
        checks,
        details(&out),
    ))
}

fn verify_transport<R: TrialRunner>(a: &TransportArgs, seed: u64, runner: &R) -> anyhow::Result<Report> {
    let mut cfg = TransportCampaignConfig::new(seed);
    cfg.dims = a.dim.clone();
    cfg.pairs = a.trials;
    cfg.tolerance = a.tolerance;
    cfg.eff_tolerance = a.eff_tolerance;
    cfg.eff_grid_points = a.grid;
    if let (Some(lambda), Some(alpha), Some(beta)) = (a.lambda, a.alpha, a.beta) {
        MapParams::new(alpha, beta)?;
        cfg.settings = vec![TransportSetting { lambda, alpha, beta }];
    }
    let out = transport_campaign(&cfg, runner)?;
    let checks = out.report.clone();
    Ok(Report::new(
        "verify-transport",
        to_value(&cfg),
        seed,
        checks,
        details(&out),
    ))
}

fn matrix_json(m: &SpdMatrix) -> Value {
    json!(m.base().packed())
}

fn mc_report(command: &str, config: Value, out: McCampaignReport) -> Report {
    let checks = out.report.clone();
    let seed = out.seed;
    Report::new(command, config, seed, checks, details(&out))
}

fn test_direc<R: TrialRunner>(a: &DirecArgs, seed: u64, runner: &R) -> anyhow::Result<Report> {
    let am = parse_matrix(&a.a, a.dim).context("--a")?;
    let bm = parse_matrix(&a.b, a.dim).context("--b")?;
    let params = MapParams::new(a.alpha, a.beta)?;
    let mut cfg = DirecConfig::new(a.lambda, params, am, bm, seed)?;
    cfg.mc = a.mc.settings(a.dim, seed);
    let config = json!({
        "dim": a.dim,
        "lambda": cfg.lambda,
        "params": cfg.params,
        "a": matrix_json(&cfg.a),
        "b": matrix_json(&cfg.b),
        "mc": cfg.mc,
        "transport_pairs": cfg.transport_pairs,
        "transport_tolerance": cfg.transport_tolerance,
        "mutation_factor": cfg.mutation_factor,
    });
    Ok(mc_report("test-direc", config, direc_campaign(&cfg, runner)))
}

fn test_my<R: TrialRunner>(a: &MyArgs, seed: u64, runner: &R) -> anyhow::Result<Report> {
    let am = parse_matrix(&a.a, a.dim).context("--a")?;
    let bm = parse_matrix(&a.b, a.dim).context("--b")?;
    let mut cfg = MyConfig::new(a.lambda, am, bm, seed)?;
    cfg.mc = a.mc.settings(a.dim, seed);
    let config = json!({
        "dim": a.dim,
        "lambda": cfg.lambda,
        "a": matrix_json(&cfg.a),
        "b": matrix_json(&cfg.b),
        "mc": cfg.mc,
    });
    Ok(mc_report("test-my", config, my_property_campaign(&cfg, runner)))
}

/// A scalar coefficient: a number, `scaled:c` or `identity`. Zero is
/// allowed and selects a boundary law.
fn scalar_coefficient(spec: &str) -> anyhow::Result<f64> {
    let s = spec.trim();
    if s == "identity" {
        return Ok(1.0);
    }
    let s = s.strip_prefix("scaled:").unwrap_or(s);
    s.parse::<f64>()
        .with_context(|| format!("not a scalar coefficient: {spec:?}"))
}

fn draws_csv(dim: usize, rows: &[&SymMatrix]) -> anyhow::Result<String> {
    let mut w = csv_writer(Vec::new());
    let header: Vec<String> = if dim == 1 {
        vec!["x".into()]
    } else {
        (0..dim)
            .flat_map(|i| (0..=i).map(move |j| format!("x{}{}", i + 1, j + 1)))
            .collect()
    };
    w.write_record(&header)?;
    for m in rows {
        // shortest round-trip formatting keeps every bit
        w.write_record(m.packed().iter().map(|v| v.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn sample<R: TrialRunner>(a: &SampleArgs, seed: u64, runner: &R) -> anyhow::Result<(Report, String)> {
    if a.n == 0 {
        bail!("--n must be positive");
    }
    let stream = RngStream::new(seed, SAMPLE_STREAM);
    let mut checks = VerificationReport::new();
    let mut details = json!({ "sampler": a.law, "stream_id": SAMPLE_STREAM, "n": a.n, "dim": a.dim });
    let (config, draws): (Value, Vec<SymMatrix>) = match a.law {
        Law::Gig => {
            if a.dim != 1 {
                bail!("gig is a scalar law; use mgig for --dim {}", a.dim);
            }
            let law = ScalarLaw::from_coefficients(a.lambda, scalar_coefficient(&a.a)?, scalar_coefficient(&a.b)?)?;
            let mut rng = stream.rng();
            let draws = (0..a.n)
                .map(|_| SymMatrix::from_diag(&[law.sample(&mut rng)]))
                .collect();
            (json!({ "law": law }), draws)
        }
        Law::Wishart => {
            let scale = parse_matrix(&a.a, a.dim).context("--a")?;
            let w = WishartParams::new(a.lambda, scale.clone())?;
            let mut rng = stream.rng();
            let draws = (0..a.n).map(|_| w.sample(&mut rng).matrix().clone()).collect();
            details["has_density"] = json!(w.has_density());
            (json!({ "lambda": a.lambda, "a": matrix_json(&scale) }), draws)
        }
        Law::Mgig => {
            let am = parse_matrix(&a.a, a.dim).context("--a")?;
            let bm = parse_matrix(&a.b, a.dim).context("--b")?;
            let p = MgigParams::new(a.lambda, am.clone(), bm.clone())?;
            let mut chain = ChainConfig::default();
            if let Some(b) = a.burn_in {
                chain.burn_in = b;
            }
            if let Some(t) = a.thin {
                chain.thin = t;
            }
            let chains = a.chains.max(1);
            let per_chain = a.n.div_ceil(chains);
            let mut out = mgig_mh_chains(&p, &chain, chains, per_chain, &stream, runner)?;
            out.draws.truncate(a.n);
            checks.push(Check::above(
                "chain/acceptance_rate_min",
                out.acceptance_rate,
                MIN_ACCEPTANCE,
            ));
            checks.push(Check::at_most(
                "chain/acceptance_rate_max",
                out.acceptance_rate,
                MAX_ACCEPTANCE,
            ));
            checks.push(Check::above("chain/ess_per_draw", out.ess_per_draw, MIN_ESS_PER_DRAW));
            details["acceptance_rate"] = json!(out.acceptance_rate);
            details["ess_per_draw"] = json!(out.ess_per_draw);
            details["step_scale"] = json!(out.step_scale);
            details["converged"] = json!(out.converged);
            let config = json!({
                "lambda": a.lambda,
                "a": matrix_json(&am),
                "b": matrix_json(&bm),
                "chain": chain,
                "chains": chains,
            });
            (config, out.draws.into_iter().map(SpdMatrix::into_base).collect())
        }
    };
    let refs: Vec<&SymMatrix> = draws.iter().collect();
    let csv = draws_csv(a.dim, &refs)?;
    Ok((Report::new("sample", config, seed, checks, details), csv))
}
