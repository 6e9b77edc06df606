//! Acceptance criteria run at full size. Prints one line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use mgig::oracle::GigOracle;
use mgig::{Cli, PoolRunner};
use mgig_core::campaign::DEFAULT_SEED;
use mgig_core::distributions::{
    gig_sample, mgig_mh_chains, ChainConfig, GigParams, MgigParams, RngStream, ScalarLaw, WishartParams,
};
use mgig_core::maps::MapParams;
use mgig_core::spd::SpdMatrix;
use mgig_core::stats::{
    direc_campaign, ks_one_sample, ks_two_sample, my_property_campaign, transport_campaign, DirecConfig, MyConfig,
    TransportCampaignConfig,
};
use mgig_core::suites::{appendix_campaign, maps_suite, AppendixConfig, MapsSection, MapsSuiteConfig, SuiteReport};
use mgig_core::yangbaxter::{yb_campaign, YbCampaignConfig};
use rand::distr::Distribution;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn(&PoolRunner) -> Outcome,
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn params() -> Vec<MapParams> {
    mgig::commands::default_map_params()
}

fn section(dims: &[usize], s: MapsSection, runner: &PoolRunner) -> Result<SuiteReport, String> {
    let cfg = MapsSuiteConfig::new(dims.to_vec(), params(), DEFAULT_SEED).only(s);
    maps_suite(&cfg, runner).map_err(|e| e.to_string())
}

fn first_failures(r: &SuiteReport) -> String {
    let bad: Vec<String> = r
        .report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .take(3)
        .map(|c| format!("{}={:e}", c.name, c.value))
        .chain(r.report.failures.iter().take(3).cloned())
        .collect();
    bad.join("; ")
}

fn max_str(r: &SuiteReport, q: &str) -> String {
    format!("{q} max {:.2e}", r.max_of(q).unwrap_or(f64::NAN))
}

fn involution(runner: &PoolRunner) -> Outcome {
    let r = section(&[1, 2, 3, 5, 10], MapsSection::Involution, runner)?;
    let pairs = r.cells.iter().map(|c| c.stats.count).min().unwrap_or(0);
    let detail = format!(
        "{}, {}, min pairs per cell {pairs} {}",
        max_str(&r, "phi_involution"),
        max_str(&r, "psi_involution"),
        first_failures(&r)
    );
    ensure(
        r.passed() && pairs == 1000 && r.max_of("phi_involution").unwrap() <= 1e-10,
        detail,
    )
}

fn yang_baxter(runner: &PoolRunner) -> Outcome {
    let cfg = YbCampaignConfig::new(DEFAULT_SEED);
    let r = yb_campaign(&cfg, runner).map_err(|e| e.to_string())?;
    let equal = r
        .cells
        .iter()
        .filter(|c| c.params.all_equal())
        .map(|c| c.max_residual)
        .fold(0.0, f64::max);
    let mutation = r.mutation.as_ref().map_or(f64::NAN, |m| m.median_residual);
    let grid_ok = cfg.params_grid.len() == 5 && cfg.dims == [1, 2, 3, 5] && cfg.trials == 500;
    let detail = format!(
        "max {:.2e}, equal cell {equal:.2e}, mutation median {mutation:.2e}",
        r.max_residual
    );
    ensure(
        grid_ok && r.report.passed() && r.max_residual <= 1e-9 && equal <= 1e-12 && mutation > 1e-2,
        detail,
    )
}

fn composition_trace(runner: &PoolRunner) -> Outcome {
    let cfg = AppendixConfig::new(DEFAULT_SEED);
    let r = appendix_campaign(&cfg, runner).map_err(|e| e.to_string())?;
    let has = |q: &str| r.cells.iter().any(|c| c.quantity.starts_with(q));
    let covered = ["x3", "y3", "z3", "x3_closed_form", "eleq_"].iter().all(|q| has(q));
    let worst = r.cells.iter().map(|c| c.stats.max).fold(0.0, f64::max);
    let detail = format!(
        "{} quantities, {}, {}, {}, {}, worst {worst:.2e} {}",
        r.cells.len(),
        max_str(&r, "x3"),
        max_str(&r, "y3"),
        max_str(&r, "z3"),
        max_str(&r, "x3_closed_form"),
        first_failures(&r)
    );
    ensure(r.passed() && covered && cfg.triples == 200 && worst <= 1e-10, detail)
}

fn jacobians(runner: &PoolRunner) -> Outcome {
    let r = section(&[1, 2, 3], MapsSection::Jacobian, runner)?;
    let detail = format!(
        "{}, {} {}",
        max_str(&r, "phi_jacobian"),
        max_str(&r, "psi_jacobian"),
        first_failures(&r)
    );
    ensure(r.passed(), detail)
}

fn derivatives(runner: &PoolRunner) -> Outcome {
    let r = section(&[1, 2, 3], MapsSection::Derivatives, runner)?;
    let fd = r.max_of("finite_difference_identities").unwrap_or(f64::NAN);
    let alg = r.max_of("algebraic_identities").unwrap_or(f64::NAN);
    let detail = format!(
        "finite differences max {fd:.2e}, algebraic max {alg:.2e} {}",
        first_failures(&r)
    );
    ensure(r.passed() && fd <= 1e-5 && alg <= 1e-11, detail)
}

fn transport(runner: &PoolRunner) -> Outcome {
    let cfg = TransportCampaignConfig::new(DEFAULT_SEED);
    let r = transport_campaign(&cfg, runner).map_err(|e| e.to_string())?;
    let detail = format!(
        "constancy max {:.2e}, eff {:.2e}, mutations {:.2e} / {:.2e}",
        r.max_residual, r.eff_residual, r.transport_mutation_residual, r.eff_mutation_residual
    );
    ensure(
        r.report.passed()
            && r.max_residual <= 1e-9
            && r.eff_residual <= 1e-10
            && r.transport_mutation_residual > 1e-2
            && r.eff_mutation_residual > 1e-2,
        detail,
    )
}

fn monte_carlo(runner: &PoolRunner) -> Outcome {
    let one = SpdMatrix::identity(1);
    let direc = DirecConfig::new(
        0.7,
        MapParams::new(2.0, 0.5).unwrap(),
        one.clone(),
        one.clone(),
        DEFAULT_SEED,
    )
    .map_err(|e| e.to_string())?;
    let my = MyConfig::new(1.0, one.clone(), one, DEFAULT_SEED).map_err(|e| e.to_string())?;
    let sizes_ok = direc.mc.n == 20_000 && direc.mc.permutations == 999 && direc.mc.level == 0.01;
    let d = direc_campaign(&direc, runner);
    let m = my_property_campaign(&my, runner);
    let p = |r: &Option<mgig_core::stats::IndependenceReport>| r.as_ref().map_or(f64::NAN, |r| r.p_value);
    let detail = format!(
        "direc p = {:.3}/{:.3}/{:.3} control {:.1e}; MY p = {:.3}/{:.3}/{:.3} control {:.1e} {:?} {:?}",
        p(&d.independence),
        p(&d.marginal_u),
        p(&d.marginal_v),
        p(&d.control),
        p(&m.independence),
        p(&m.marginal_u),
        p(&m.marginal_v),
        p(&m.control),
        d.report.failures,
        m.report.failures,
    );
    ensure(
        sizes_ok && d.passed() && m.passed() && p(&d.control) < 1e-3 && p(&m.control) < 1e-3,
        detail,
    )
}

fn samplers(runner: &PoolRunner) -> Outcome {
    const N: usize = 50_000;
    let settings = [
        (0.5, 1.0, 1.0),
        (-1.5, 2.0, 0.5),
        (2.5, 0.3, 4.0),
        (-0.3, 0.05, 0.05),
        (1.7, 2.0, 0.0),
        (-2.2, 0.0, 1.5),
    ];
    let mut worst: f64 = 0.0;
    for (k, &(l, a, b)) in settings.iter().enumerate() {
        let law = ScalarLaw::from_coefficients(l, a, b).map_err(|e| e.to_string())?;
        let oracle = GigOracle::new(&law);
        let mut rng = RngStream::new(DEFAULT_SEED, 0x4b53).substream(k as u64).rng();
        let draws: Vec<f64> = (0..N).map(|_| law.sample(&mut rng)).collect();
        let ks = ks_one_sample(&draws, |x| oracle.cdf(x)).map_err(|e| e.to_string())?;
        worst = worst.max(ks.statistic);
    }

    // r = 1 chains against the exact sampler
    let (l, a, b) = (-0.8, 1.5, 2.0);
    let p = MgigParams::new(
        l,
        SpdMatrix::from_diag(&[a]).unwrap(),
        SpdMatrix::from_diag(&[b]).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let out = mgig_mh_chains(
        &p,
        &ChainConfig::default(),
        100,
        50,
        &RngStream::new(DEFAULT_SEED, 0x4d48),
        runner,
    )
    .map_err(|e| e.to_string())?;
    let mh: Vec<f64> = out.draws.iter().map(|x| x.base().get(0, 0)).collect();
    let gig = GigParams::new(l, a, b).unwrap();
    let mut rng = RngStream::new(DEFAULT_SEED, 0x4758).rng();
    let exact: Vec<f64> = (0..mh.len()).map(|_| gig_sample(&gig, &mut rng)).collect();
    let two = ks_two_sample(&mh, &exact).map_err(|e| e.to_string())?;

    // Wishart entries against λ c⁻¹
    let mut c = SpdMatrix::from_diag(&[1.0, 2.0, 0.5]).unwrap().into_base();
    c.set(1, 0, 0.3);
    c.set(2, 1, -0.2);
    let w = WishartParams::new(3.5, SpdMatrix::new(c).unwrap()).map_err(|e| e.to_string())?;
    let mean = w.mean().map_err(|e| e.to_string())?;
    let mut rng = RngStream::new(DEFAULT_SEED, 0x5753).rng();
    let draws: Vec<Vec<f64>> = (0..N).map(|_| w.sample(&mut rng).matrix().packed().to_vec()).collect();
    let mut worst_z: f64 = 0.0;
    for (e, &target) in mean.packed().iter().enumerate() {
        let xs: Vec<f64> = draws.iter().map(|d| d[e]).collect();
        let m = xs.iter().sum::<f64>() / N as f64;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (N - 1) as f64;
        worst_z = worst_z.max((m - target).abs() / (var / N as f64).sqrt());
    }
    let detail = format!(
        "GIG worst KS {worst:.4}, MH vs exact p = {:.3} (acceptance {:.2}), Wishart worst |z| {worst_z:.2}",
        two.p_value, out.acceptance_rate
    );
    ensure(
        worst < 0.015 && two.p_value > 0.01 && out.converged && worst_z <= 3.0,
        detail,
    )
}

fn cone(runner: &PoolRunner) -> Outcome {
    let r = section(&[1, 2, 3], MapsSection::Cone, runner)?;
    let pairs = r.cells.iter().map(|c| c.stats.count).min().unwrap_or(0);
    let detail = format!(
        "{}, min pairs per cell {pairs} {}",
        max_str(&r, "cone_vs_phi"),
        first_failures(&r)
    );
    ensure(r.passed() && pairs == 200, detail)
}

fn cli_run(args: &[&str]) -> Result<mgig::Output, String> {
    let cli = Cli::try_parse_from(std::iter::once("mgig").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    mgig::run(&cli).map_err(|e| format!("{e:#}"))
}

fn reproducibility(_: &PoolRunner) -> Outcome {
    let commands: [&[&str]; 7] = [
        &["verify-yb", "--trials", "40"],
        &["verify-maps", "--trials", "20", "--dim", "1,2,3"],
        &["verify-appendix", "--trials", "20"],
        &["verify-transport", "--trials", "50", "--grid", "10"],
        &[
            "test-direc",
            "--n",
            "600",
            "--B",
            "199",
            "--control-permutations",
            "199",
        ],
        &[
            "test-my",
            "--dim",
            "2",
            "--n",
            "200",
            "--B",
            "99",
            "--chains",
            "4",
            "--no-control",
        ],
        &[
            "sample", "mgig", "--dim", "2", "--lambda", "2", "--n", "300", "--chains", "3",
        ],
    ];
    let mut compared = 0;
    for cmd in commands {
        let mut outputs = vec![];
        for threads in ["1", "3", "8"] {
            let mut args = cmd.to_vec();
            args.extend(["--seed", "11", "--threads", threads]);
            outputs.push(cli_run(&args)?);
        }
        for o in &outputs[1..] {
            if o.report.numerical_part() != outputs[0].report.numerical_part() || o.csv != outputs[0].csv {
                return Err(format!("{} differs across thread counts", cmd[0]));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} report pairs identical across 1, 3 and 8 threads"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "involutions",
            limit: Duration::from_secs(30),
            run: involution,
        },
        Criterion {
            id: 2,
            name: "yang-baxter",
            limit: Duration::from_secs(120),
            run: yang_baxter,
        },
        Criterion {
            id: 3,
            name: "composition trace",
            limit: Duration::from_secs(60),
            run: composition_trace,
        },
        Criterion {
            id: 4,
            name: "jacobians",
            limit: Duration::from_secs(120),
            run: jacobians,
        },
        Criterion {
            id: 5,
            name: "derivative identities",
            limit: Duration::from_secs(60),
            run: derivatives,
        },
        Criterion {
            id: 6,
            name: "density transport",
            limit: Duration::from_secs(60),
            run: transport,
        },
        Criterion {
            id: 7,
            name: "monte carlo independence",
            limit: Duration::from_secs(300),
            run: monte_carlo,
        },
        Criterion {
            id: 8,
            name: "samplers",
            limit: Duration::from_secs(300),
            run: samplers,
        },
        Criterion {
            id: 9,
            name: "cone candidate",
            limit: Duration::from_secs(30),
            run: cone,
        },
        Criterion {
            id: 10,
            name: "reproducibility",
            limit: Duration::MAX,
            run: reproducibility,
        },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let runner = PoolRunner::new(threads).expect("thread pool");
    let mut failed = 0;
    for c in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)(&runner);
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if took < c.limit => (true, d),
            Ok(d) => (false, format!("{d}; over time limit")),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {} ({:.1}s) {}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            detail
        );
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
