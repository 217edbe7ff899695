//! Sweep execution.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;

use crate::algorithms::{
    build_masg_schedule, corollary_k1, kappa_tilde, run, Method, Plan, RunConfig, RunOptions, Trace,
};
use crate::analysis::{
    dasg_bound, dsg_bound, fixed_point, masg_bound, BoundInputs, BoundReport, BoundTarget, MasgInputs,
};
use crate::error::{Error, Result};
use crate::netgraph::MixingMatrix;
use crate::noise::{estimate_sigma2, NoiseSpec};
use crate::objectives::ObjectiveSuite;

use super::config::{ExperimentConfig, SweepPoint};

/// Draws used to estimate `σ²` for minibatch noise.
const SIGMA_DRAWS: usize = 1000;

/// One row of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_id: usize,
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    pub k: u64,
    pub dist2_opt: f64,
    pub dist2_fixed: Option<f64>,
    pub avg_dist2_opt: f64,
    pub consensus_err: f64,
    pub bound_fixed: Option<f64>,
    pub bound_opt: Option<f64>,
}

/// Outcome of one sweep point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: SweepPoint,
    pub plan: Plan,
    pub trace: Trace,
    pub bound_fixed: Option<BoundReport>,
    pub bound_opt: Option<BoundReport>,
}

/// Replicate-averaged rows for every sweep point, sorted by `(sweep_id, k)`.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub with_bounds: bool,
    pub rows: Vec<ResultRow>,
    pub points: Vec<PointResult>,
}

/// Run every sweep point on a pool of `jobs` threads (`None`: all cores).
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ResultTable> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep_inner(cfg))
}

fn run_sweep_inner(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let points = cfg.sweep_points();
    let mut suites: BTreeMap<usize, ObjectiveSuite> = BTreeMap::new();
    for p in &points {
        let n = p.topology.node_count();
        if let std::collections::btree_map::Entry::Vacant(e) = suites.entry(n) {
            e.insert(cfg.suite(n)?);
        }
    }
    let results =
        points.par_iter().map(|p| run_point(cfg, p, &suites[&p.topology.node_count()])).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for r in &results {
        let (alpha, beta) = r.plan.first_alpha_beta();
        for tp in &r.trace.points {
            rows.push(ResultRow {
                sweep_id: r.point.id,
                method: r.point.method,
                alpha,
                beta,
                k: tp.k,
                dist2_opt: tp.dist2_opt,
                dist2_fixed: tp.dist2_fixed,
                avg_dist2_opt: tp.avg_dist2_opt,
                consensus_err: tp.consensus_err,
                bound_fixed: r.bound_fixed.as_ref().and_then(|b| b.at(tp.k)),
                bound_opt: r.bound_opt.as_ref().and_then(|b| b.at(tp.k)),
            });
        }
    }
    Ok(ResultTable { with_bounds: cfg.bounds, rows, points: results })
}

/// Resolve the iteration plan of a sweep point.
pub fn point_plan(cfg: &ExperimentConfig, p: &SweepPoint, suite: &ObjectiveSuite, w: &MixingMatrix) -> Result<Plan> {
    match p.method {
        Method::Dmasg => {
            let spec = cfg.masg.ok_or_else(|| Error::Config("missing masg block".into()))?;
            let k1 = match spec.k1 {
                Some(k) => k,
                None => corollary_k1(spec.p, kappa_tilde(suite.mu, suite.lipschitz, w.lambda_min)),
            };
            Ok(Plan::Masg(build_masg_schedule(k1, spec.p, suite, w, spec.stages)?))
        }
        method => RunConfig {
            method,
            alpha: p.alpha.expect("stepped methods carry alpha"),
            beta: p.beta,
            iters: cfg.iters,
            replicates: cfg.replicates,
            record_every: cfg.record_every,
        }
        .plan(suite, w),
    }
}

fn run_point(cfg: &ExperimentConfig, p: &SweepPoint, suite: &ObjectiveSuite) -> Result<PointResult> {
    let w = cfg.mixing(&p.topology)?;
    let n = suite.node_count();
    let x0 = cfg.init.stacked(n, suite.dim())?;
    let plan = point_plan(cfg, p, suite, &w)?;
    let x_inf = match plan {
        Plan::Masg(_) => None,
        Plan::Dsg { alpha, .. } | Plan::Dasg { alpha, .. } => match fixed_point(&w, alpha, suite) {
            Ok(x) => Some(x),
            Err(e) => {
                warn!("sweep point {}: no fixed point ({e}); dist2_fixed left empty", p.id);
                None
            }
        },
    };
    info!("sweep point {} ({} on {}, {})", p.id, p.method.name(), p.topology.label(), p.noise.label());
    let opts =
        RunOptions { replicates: cfg.replicates, record_every: cfg.record_every, seed: cfg.seed, per_node: false };
    let trace = run(&plan, &w, suite, &p.noise, &x0, x_inf.as_deref(), &opts)?;

    let (bound_fixed, bound_opt) = if cfg.bounds {
        let ks: Vec<u64> = trace.points.iter().map(|t| t.k).collect();
        point_bounds(cfg, &plan, &w, suite, &p.noise, &x0, &ks)?
    } else {
        (None, None)
    };
    Ok(PointResult { point: p.clone(), plan, trace, bound_fixed, bound_opt })
}

/// Effective `σ` for the bounds; `None` when the noise model has no such bound.
fn bound_sigma(noise: &NoiseSpec, suite: &ObjectiveSuite, seed: u64) -> Result<Option<f64>> {
    match noise {
        NoiseSpec::Exact => Ok(Some(0.0)),
        NoiseSpec::GaussianIso { sigma } => Ok(Some(*sigma)),
        NoiseSpec::Relative { eta, sigma } => Ok((*eta == 0.0).then_some(*sigma)),
        NoiseSpec::Minibatch { .. } => Ok(Some(estimate_sigma2(noise, suite, SIGMA_DRAWS, seed)?.sqrt())),
    }
}

/// Bounds against `x^∞` and `x*` at the iterations `ks`; `None` where the
/// stepsize or noise model falls outside the analyzed range.
pub fn point_bounds(
    cfg: &ExperimentConfig,
    plan: &Plan,
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    noise: &NoiseSpec,
    x0: &[f64],
    ks: &[u64],
) -> Result<(Option<BoundReport>, Option<BoundReport>)> {
    let Some(sigma) = bound_sigma(noise, suite, cfg.seed)? else {
        return Ok((None, None));
    };
    let soft = |r: Result<BoundReport>| match r {
        Ok(b) => Some(b),
        Err(e) => {
            info!("bound skipped: {e}");
            None
        }
    };
    Ok(match plan {
        Plan::Dsg { alpha, .. } => {
            let inp = BoundInputs::gather(w, suite, sigma, *alpha, 0.0, x0)?;
            (soft(dsg_bound(ks, &inp, BoundTarget::Fixed)), soft(dsg_bound(ks, &inp, BoundTarget::Optimum)))
        }
        Plan::Dasg { alpha, beta, .. } => {
            let inp = BoundInputs::gather(w, suite, sigma, *alpha, *beta, x0)?;
            let keep = |r: Option<BoundReport>| r.filter(|b| b.flags.is_empty());
            (
                keep(soft(dasg_bound(ks, &inp, BoundTarget::Fixed))),
                keep(soft(dasg_bound(ks, &inp, BoundTarget::Optimum))),
            )
        }
        Plan::Masg(schedule) => {
            let d = suite.dim();
            let init_dist2_opt =
                (0..suite.node_count()).map(|i| crate::linalg::dist2_sq(&x0[i * d..(i + 1) * d], &suite.x_star)).sum();
            let inp = MasgInputs {
                n: suite.node_count(),
                sigma,
                mu: suite.mu,
                l: suite.lipschitz,
                lambda_n: w.lambda_min,
                gamma: w.gamma,
                c1: suite.c1_constant(),
                init_dist2_opt,
            };
            let spec = cfg.masg.expect("dmasg plan implies masg block");
            let k1 = schedule.stages[0].len;
            (None, soft(masg_bound(&schedule.boundaries(), k1, spec.p, &inp, schedule.stages[0].alpha)))
        }
    })
}
