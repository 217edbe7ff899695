//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::algorithms::{record_points, standard_beta, Method};
use crate::analysis::{certify_s_alpha, mi_check, tradeoff_alpha, BoundReport, MiCertificate, TradeoffParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::noise::NoiseSpec;
use crate::quadratic_exact::{
    aq_spectrum, node_avg_var_bound, rho_dasg_quadratic, var_dasg_exact, var_dsg_exact, QuadSpectrum,
};

use super::config::{ExperimentConfig, SweepPoint};
use super::output::{write_results, write_spectrum};
use super::selftest::run_selftest;
use super::sweep::{point_bounds, point_plan, run_sweep, ResultTable};

#[derive(Debug, Parser)]
#[command(name = "dsgd", version, about = "Decentralized stochastic gradient simulator and analyzer")]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured sweep and write the result table as CSV.
    Simulate,
    /// Evaluate the error bounds of every sweep point as JSON.
    Analyze {
        /// Emit the exact quadratic spectra and variances instead.
        #[arg(long)]
        quadratic_exact: bool,
    },
    /// Check the matrix-inequality certificate for one stepsize.
    Certify(CertifyArgs),
    /// Solve the rate/robustness trade-off for a rate slack delta.
    Tradeoff(TradeoffArgs),
    /// Write the mixing-matrix eigenvalues of every configured topology.
    Spectrum,
    /// Run the built-in oracle cross-checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct Constants {
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub lambda_n: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub constants: Constants,
    /// Use the explicit certificate with the standard momentum.
    #[arg(long, conflicts_with_all = ["beta", "rho", "p"])]
    pub auto: bool,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Entries `p11,p12,p22` of the symmetric 2×2 matrix.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub constants: Constants,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn sink(out: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit_json(value: &impl Serialize, out: Option<&PathBuf>) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(cli)?;
            let table: ResultTable = run_sweep(&cfg, cli.jobs)?;
            let out = cli.out.as_ref().or(cfg.output.as_ref());
            let mut w = sink(out)?;
            write_results(&table, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Analyze { quadratic_exact } => {
            let cfg = load_config(cli)?;
            if *quadratic_exact {
                emit_json(&quadratic_reports(&cfg)?, cli.out.as_ref())?;
            } else {
                emit_json(&bound_reports(&cfg)?, cli.out.as_ref())?;
            }
            Ok(0)
        }
        Command::Certify(args) => {
            let (mu, l, ln) = resolve_constants(cli, &args.constants)?;
            let cert: MiCertificate = if args.auto {
                certify_s_alpha(args.alpha, mu, l, ln)?
            } else {
                let (Some(beta), Some(rho), Some(p)) = (args.beta, args.rho, args.p.as_ref()) else {
                    return Err(Error::Config("certify needs --auto or all of --beta, --rho, --p".into()));
                };
                if p.len() != 3 {
                    return Err(Error::Config(format!("--p needs three entries p11,p12,p22, got {}", p.len())));
                }
                let pm = Matrix::from_rows(&[vec![p[0], p[1]], vec![p[1], p[2]]]);
                mi_check(args.alpha, beta, rho, &pm, mu, l, ln)?
            };
            emit_json(&cert, cli.out.as_ref())?;
            Ok(0)
        }
        Command::Tradeoff(args) => {
            let params = resolve_tradeoff(cli, args)?;
            #[derive(Serialize)]
            struct Out {
                alpha_star: f64,
                j_tot: f64,
                alpha_bar: f64,
                rho_star: f64,
                delta: f64,
                params: TradeoffParams,
            }
            let t = tradeoff_alpha(args.delta, &params)?;
            let out = Out {
                alpha_star: t.alpha_star,
                j_tot: t.j_tot,
                alpha_bar: t.alpha_bar,
                rho_star: t.rho_star,
                delta: t.delta,
                params,
            };
            emit_json(&out, cli.out.as_ref())?;
            Ok(0)
        }
        Command::Spectrum => {
            let cfg = load_config(cli)?;
            let mixings =
                cfg.topology.iter().map(|t| cfg.mixing(t).map(|w| (t.label(), w))).collect::<Result<Vec<_>>>()?;
            let entries: Vec<_> = mixings.iter().map(|(l, w)| (l.clone(), w)).collect();
            let mut w = sink(cli.out.as_ref())?;
            write_spectrum(&entries, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Selftest => {
            let checks = run_selftest();
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            Ok(if failed == 0 { 0 } else { 2 })
        }
    }
}

/// `(μ, L, λ_N)` from flags, falling back to the first configured point.
fn resolve_constants(cli: &Cli, c: &Constants) -> Result<(f64, f64, f64)> {
    if let (Some(mu), Some(l), Some(ln)) = (c.mu, c.l, c.lambda_n) {
        return Ok((mu, l, ln));
    }
    let cfg = load_config(cli).map_err(|_| Error::Config("pass --mu, --l, --lambda-n or --config".into()))?;
    let topo = &cfg.topology[0];
    let suite = cfg.suite(topo.node_count())?;
    let w = cfg.mixing(topo)?;
    Ok((c.mu.unwrap_or(suite.mu), c.l.unwrap_or(suite.lipschitz), c.lambda_n.unwrap_or(w.lambda_min)))
}

fn resolve_tradeoff(cli: &Cli, a: &TradeoffArgs) -> Result<TradeoffParams> {
    let c = &a.constants;
    if let (Some(mu), Some(l), Some(lambda_n), Some(sigma), Some(n), Some(c1), Some(gamma)) =
        (c.mu, c.l, c.lambda_n, a.sigma, a.n, a.c1, a.gamma)
    {
        return Ok(TradeoffParams { mu, l, lambda_n, sigma, n, c1, gamma });
    }
    let cfg = load_config(cli).map_err(|_| Error::Config("pass every constant flag or --config".into()))?;
    let topo = &cfg.topology[0];
    let suite = cfg.suite(topo.node_count())?;
    let w = cfg.mixing(topo)?;
    let sigma = match a.sigma {
        Some(s) => s,
        None => crate::noise::estimate_sigma2(&cfg.noise[0], &suite, 1000, cfg.seed)?.sqrt(),
    };
    Ok(TradeoffParams {
        mu: c.mu.unwrap_or(suite.mu),
        l: c.l.unwrap_or(suite.lipschitz),
        lambda_n: c.lambda_n.unwrap_or(w.lambda_min),
        sigma,
        n: a.n.unwrap_or(suite.node_count()),
        c1: a.c1.unwrap_or_else(|| suite.c1_constant()),
        gamma: a.gamma.unwrap_or(w.gamma),
    })
}

#[derive(Debug, Serialize)]
struct PointBounds {
    sweep_id: usize,
    point: SweepPoint,
    bound_fixed: Option<BoundReport>,
    bound_opt: Option<BoundReport>,
}

fn bound_reports(cfg: &ExperimentConfig) -> Result<Vec<PointBounds>> {
    let mut reports = Vec::new();
    for p in cfg.sweep_points() {
        let suite = cfg.suite(p.topology.node_count())?;
        let w = cfg.mixing(&p.topology)?;
        let x0 = cfg.init.stacked(suite.node_count(), suite.dim())?;
        let plan = point_plan(cfg, &p, &suite, &w)?;
        let ks = record_points(plan.total_iters(), cfg.record_every);
        let (bound_fixed, bound_opt) = point_bounds(cfg, &plan, &w, &suite, &p.noise, &x0, &ks)?;
        reports.push(PointBounds { sweep_id: p.id, point: p, bound_fixed, bound_opt });
    }
    Ok(reports)
}

#[derive(Debug, Serialize)]
struct QuadraticExactReport {
    sweep_id: usize,
    point: SweepPoint,
    spectrum: QuadSpectrum,
    rho_dsg: f64,
    rho_dasg: f64,
    beta: f64,
    var_dsg: Option<f64>,
    var_dasg: Option<f64>,
    j_inf_dsg: Option<f64>,
    j_inf_dasg: Option<f64>,
    node_avg_bound: Option<f64>,
}

fn quadratic_reports(cfg: &ExperimentConfig) -> Result<Vec<QuadraticExactReport>> {
    let mut reports = Vec::new();
    for p in cfg.sweep_points() {
        let Some(alpha) = p.alpha else { continue };
        let sigma = match p.noise {
            NoiseSpec::Exact => 0.0,
            NoiseSpec::GaussianIso { sigma } => sigma,
            _ => return Err(Error::Config("quadratic-exact analysis needs exact or gaussian_iso noise".into())),
        };
        let n = p.topology.node_count();
        let suite = cfg.suite(n)?;
        if !suite.is_quadratic() {
            return Err(Error::NonQuadraticSuite);
        }
        let w = cfg.mixing(&p.topology)?;
        let spectrum = aq_spectrum(&w, alpha, &suite)?;
        let d = suite.dim();
        let beta = match p.method {
            Method::Dsg => 0.0,
            _ => p.beta.unwrap_or_else(|| standard_beta(alpha, suite.mu)),
        };
        let dsg = var_dsg_exact(&spectrum, sigma, d, alpha).ok();
        let dasg = var_dasg_exact(&spectrum, beta, sigma, d, alpha).ok();
        reports.push(QuadraticExactReport {
            sweep_id: p.id,
            rho_dsg: spectrum.rho_dsg(),
            rho_dasg: rho_dasg_quadratic(&spectrum, beta),
            beta,
            var_dsg: dsg.map(|v| v.variance),
            var_dasg: dasg.map(|v| v.variance),
            j_inf_dsg: dsg.map(|v| v.j_inf),
            j_inf_dasg: dasg.map(|v| v.j_inf),
            node_avg_bound: node_avg_var_bound(&spectrum, beta, sigma, n, d, alpha).ok(),
            spectrum,
            point: p,
        });
    }
    Ok(reports)
}
