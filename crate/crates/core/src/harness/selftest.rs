//! Quick cross-checks of closed forms against brute-force oracles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algorithms::standard_beta;
use crate::analysis::{certify_s_alpha, fixed_point, rho_dsg, tradeoff_alpha, PenalizedObjective, TradeoffParams};
use crate::error::Result;
use crate::linalg::norm2_sq;
use crate::netgraph::{build_mixing, Topology, WeightRule};
use crate::objectives::{synthetic_logistic, LogisticParams};
use crate::oracles::{lyapunov_iterate, power_spectral_radius};
use crate::quadratic_exact::{
    a_dasg_matrix, a_dsg_matrix, aq_spectrum, noise_input_covariance, rho_dasg_quadratic, var_dasg_exact, var_dsg_exact,
};

use super::reference_instance;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Run every check; errors inside a check count as failures.
pub fn run_selftest() -> Vec<Check> {
    let checks: [(&'static str, fn() -> Result<(bool, String)>); 7] = [
        ("dsg variance vs Lyapunov", dsg_variance),
        ("dasg variance vs Lyapunov", dasg_variance),
        ("dsg rate vs eigensolver", dsg_rate),
        ("dasg rate vs power iteration", dasg_rate),
        ("MI certificate grid", mi_grid),
        ("fixed-point residual", fixed_point_residual),
        ("trade-off boundary case", tradeoff_boundary),
    ];
    checks
        .iter()
        .map(|(name, f)| match f() {
            Ok((ok, detail)) => check(name, ok, detail),
            Err(e) => check(name, false, format!("error: {e}")),
        })
        .collect()
}

const ALPHA: f64 = 0.05;

fn dsg_variance() -> Result<(bool, String)> {
    let (w, suite) = reference_instance()?;
    let spec = aq_spectrum(&w, ALPHA, &suite)?;
    let exact = var_dsg_exact(&spec, 1.0, suite.dim(), ALPHA)?.variance;
    let a = a_dsg_matrix(&w, ALPHA, &suite)?;
    let oracle =
        lyapunov_iterate(&a, &noise_input_covariance(a.rows(), suite.dim(), 1.0, ALPHA, false), 1e-15, 1_000_000)?;
    let r = rel(exact, oracle.trace);
    Ok((r < 1e-8, format!("closed form {exact:.12e}, oracle {:.12e}, rel {r:.1e}", oracle.trace)))
}

fn dasg_variance() -> Result<(bool, String)> {
    let (w, suite) = reference_instance()?;
    let beta = standard_beta(ALPHA, suite.mu);
    let spec = aq_spectrum(&w, ALPHA, &suite)?;
    let exact = var_dasg_exact(&spec, beta, 1.0, suite.dim(), ALPHA)?.variance;
    let a = a_dasg_matrix(&w, ALPHA, beta, &suite)?;
    let nd = a.rows() / 2;
    let oracle = lyapunov_iterate(&a, &noise_input_covariance(nd, suite.dim(), 1.0, ALPHA, true), 1e-15, 1_000_000)?;
    let top: f64 = (0..nd).map(|i| oracle.sigma[(i, i)]).sum();
    let r = rel(exact, top);
    Ok((r < 1e-8, format!("closed form {exact:.12e}, oracle {top:.12e}, rel {r:.1e}")))
}

fn dsg_rate() -> Result<(bool, String)> {
    let (w, suite) = reference_instance()?;
    let formula = rho_dsg(ALPHA, suite.mu, suite.lipschitz, w.lambda_min)?;
    let eig = aq_spectrum(&w, ALPHA, &suite)?.rho_dsg();
    Ok(((formula - eig).abs() < 1e-10, format!("formula {formula:.15}, eigensolver {eig:.15}")))
}

fn dasg_rate() -> Result<(bool, String)> {
    let (w, suite) = reference_instance()?;
    let beta = 0.3;
    let closed = rho_dasg_quadratic(&aq_spectrum(&w, ALPHA, &suite)?, beta);
    let power = power_spectral_radius(&a_dasg_matrix(&w, ALPHA, beta, &suite)?, 1e-13, 1_000_000)?;
    Ok(((closed - power).abs() < 1e-6, format!("closed form {closed:.12}, power iteration {power:.12}")))
}

fn mi_grid() -> Result<(bool, String)> {
    let (w, suite) = reference_instance()?;
    let (mu, l, ln) = (suite.mu, suite.lipschitz, w.lambda_min);
    let abar = (ln / l).min(1.0 / (l + mu));
    let mut worst = f64::INFINITY;
    for j in 0..20 {
        let alpha = abar * 10f64.powf(-3.0 * j as f64 / 19.0);
        worst = worst.min(certify_s_alpha(alpha, mu, l, ln)?.min_eig_slack);
    }
    Ok((worst >= -1e-10, format!("worst slack {worst:.3e}")))
}

fn fixed_point_residual() -> Result<(bool, String)> {
    let params = LogisticParams { nodes: 4, samples: 80, dim: 5, ..LogisticParams::default() };
    let suite = synthetic_logistic(&params, &mut ChaCha8Rng::seed_from_u64(3))?;
    let w = build_mixing(&Topology::Ring { n: 4 }, WeightRule::Metropolis)?;
    let x = fixed_point(&w, 0.05, &suite)?;
    let g = PenalizedObjective::new(&w, 0.05, &suite)?.grad(&x)?;
    let res = norm2_sq(&g).sqrt() * 0.05;
    Ok((res <= 1e-10, format!("residual {res:.3e}")))
}

fn tradeoff_boundary() -> Result<(bool, String)> {
    let (w, suite) = reference_instance()?;
    let params = TradeoffParams {
        mu: suite.mu,
        l: suite.lipschitz,
        lambda_n: w.lambda_min,
        sigma: 1.0,
        n: suite.node_count(),
        c1: suite.c1_constant(),
        gamma: w.gamma,
    };
    let t = tradeoff_alpha(0.0, &params)?;
    Ok((
        rel(t.alpha_star, t.alpha_bar) < 1e-14,
        format!("alpha* {:.15e}, alpha bar {:.15e}", t.alpha_star, t.alpha_bar),
    ))
}
