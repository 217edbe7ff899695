//! Exact spectra, stationary variances and finite-k bounds for quadratic
//! suites under isotropic Gaussian noise.

use serde::Serialize;

use crate::analysis::{BoundInputs, BoundReport, BoundTarget};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netgraph::MixingMatrix;
use crate::objectives::ObjectiveSuite;
use crate::oracles::symmetric_eigenvalues;

const SANDWICH_TOL: f64 = 1e-10;
const DEGENERATE_TOL: f64 = 1e-14;
const BOUNDARY_TOL: f64 = 1e-12;

/// Eigenvalues of `𝒲 − α𝑄`, sorted non-increasing.
#[derive(Debug, Clone, Serialize)]
pub struct QuadSpectrum {
    pub mu_list: Vec<f64>,
    pub alpha: f64,
}

impl QuadSpectrum {
    pub fn len(&self) -> usize {
        self.mu_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_list.is_empty()
    }

    /// `max |μ_i|`, the D-SG rate.
    pub fn rho_dsg(&self) -> f64 {
        self.mu_list.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `𝒲 − α𝑄` as a dense `Nd × Nd` matrix.
pub fn a_dsg_matrix(w: &MixingMatrix, alpha: f64, suite: &ObjectiveSuite) -> Result<Matrix> {
    if !suite.is_quadratic() {
        return Err(Error::NonQuadraticSuite);
    }
    Ok(w.kron_identity(suite.dim()).sub(&suite.stacked_hessian()?.scale(alpha)))
}

/// `[[(1+β)A_Q, −βA_Q], [I, 0]]` acting on `(x^(k) − x^∞, x^(k−1) − x^∞)`.
pub fn a_dasg_matrix(w: &MixingMatrix, alpha: f64, beta: f64, suite: &ObjectiveSuite) -> Result<Matrix> {
    let aq = a_dsg_matrix(w, alpha, suite)?;
    let nd = aq.rows();
    Ok(Matrix::block2(&aq.scale(1.0 + beta), &aq.scale(-beta), &Matrix::identity(nd), &Matrix::zeros(nd, nd)))
}

/// Stationary noise input covariance `α²(σ²/d)·diag(I, 0)` for the D-ASG state
/// (`momentum = true`) or `α²(σ²/d)I` for D-SG.
pub fn noise_input_covariance(nd: usize, d: usize, sigma: f64, alpha: f64, momentum: bool) -> Matrix {
    let v = alpha * alpha * sigma * sigma / d as f64;
    let size = if momentum { 2 * nd } else { nd };
    Matrix::from_fn(size, size, |i, j| if i == j && i < nd { v } else { 0.0 })
}

/// Eigenvalues of `𝒲 − α𝑄`. Fails with `RegimeViolation` if one leaves
/// `[λ_N − αL, 1 − αμ]` by more than `1e-10`.
pub fn aq_spectrum(w: &MixingMatrix, alpha: f64, suite: &ObjectiveSuite) -> Result<QuadSpectrum> {
    let aq = a_dsg_matrix(w, alpha, suite)?;
    let mu_list = symmetric_eigenvalues(&aq)?;
    let lo = w.lambda_min - alpha * suite.lipschitz - SANDWICH_TOL;
    let hi = 1.0 - alpha * suite.mu + SANDWICH_TOL;
    if let Some(bad) = mu_list.iter().find(|&&m| m < lo || m > hi) {
        return Err(Error::RegimeViolation(format!("eigenvalue {bad} outside [{lo}, {hi}]")));
    }
    Ok(QuadSpectrum { mu_list, alpha })
}

/// Roots of `γ² − (1+β)μγ + βμ = 0`, returned as `(|γ₊|, |γ₋|, |γ₊ − γ₋|)`.
fn momentum_roots(mu: f64, beta: f64) -> (f64, f64, f64) {
    let b = (1.0 + beta) * mu;
    let mut disc = b * b - 4.0 * beta * mu;
    // a double root computed in floating point leaves O(eps) residue whose
    // square root would split the pair by O(√eps)
    if disc.abs() <= BOUNDARY_TOL * (b * b).max(4.0 * beta * mu.abs()) {
        disc = 0.0;
    }
    if disc >= 0.0 {
        let s = disc.sqrt();
        (((b + s) / 2.0).abs(), ((b - s) / 2.0).abs(), s)
    } else {
        let m = (beta * mu).sqrt();
        (m, m, (-disc).sqrt())
    }
}

/// Spectral radius of the D-ASG iteration matrix.
pub fn rho_dasg_quadratic(spectrum: &QuadSpectrum, beta: f64) -> f64 {
    spectrum.mu_list.iter().fold(0.0, |acc, &m| {
        let (p, q, _) = momentum_roots(m, beta);
        acc.max(p).max(q)
    })
}

/// Stationary variance together with the robustness measure `J∞`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExactVariance {
    /// `lim E‖x^(k) − x^∞‖²`.
    pub variance: f64,
    pub j_inf: f64,
}

/// `α²(σ²/d) Σ 1/(1 − μ_i²)` and `J∞ = (α²/(Nd)) Σ 1/(1 − μ_i²)`.
pub fn var_dsg_exact(spectrum: &QuadSpectrum, sigma: f64, d: usize, alpha: f64) -> Result<ExactVariance> {
    let rho = spectrum.rho_dsg();
    if rho >= 1.0 {
        return Err(Error::UnstableSpectrum(rho));
    }
    let sum: f64 = spectrum.mu_list.iter().map(|m| 1.0 / (1.0 - m * m)).sum();
    Ok(ExactVariance {
        variance: alpha * alpha * sigma * sigma / d as f64 * sum,
        j_inf: alpha * alpha / spectrum.len() as f64 * sum,
    })
}

/// `α²(1+βμ)/((1−μ)(1−βμ)(2+2β−(1−μ)(1+2β)))`.
fn dasg_mode_term(mu: f64, beta: f64, alpha: f64) -> Result<f64> {
    let d1 = 1.0 - mu;
    let d2 = 1.0 - beta * mu;
    let d3 = 2.0 + 2.0 * beta - (1.0 - mu) * (1.0 + 2.0 * beta);
    if d1.abs() < DEGENERATE_TOL || d2.abs() < DEGENERATE_TOL || d3.abs() < DEGENERATE_TOL {
        return Err(Error::DegenerateEigenvalue(mu));
    }
    Ok(alpha * alpha * (1.0 + beta * mu) / (d1 * d2 * d3))
}

fn dasg_mode_terms(spectrum: &QuadSpectrum, beta: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0) {
        return Err(Error::ParameterOutOfRange(format!("beta must be nonnegative, got {beta}")));
    }
    let rho = rho_dasg_quadratic(spectrum, beta);
    if rho >= 1.0 {
        return Err(Error::UnstableSpectrum(rho));
    }
    spectrum.mu_list.iter().map(|&m| dasg_mode_term(m, beta, alpha)).collect()
}

/// `(σ²/d) Σ α²(1+βμ_i)/((1−μ_i)(1−βμ_i)(2+2β−(1−μ_i)(1+2β)))`.
pub fn var_dasg_exact(spectrum: &QuadSpectrum, beta: f64, sigma: f64, d: usize, alpha: f64) -> Result<ExactVariance> {
    let sum: f64 = dasg_mode_terms(spectrum, beta, alpha)?.iter().sum();
    Ok(ExactVariance { variance: sigma * sigma / d as f64 * sum, j_inf: sum / spectrum.len() as f64 })
}

/// Per-coordinate bound on the stationary variance of the node average,
/// `(σ²/(Nd)) max_i α²(1+βμ_i)/(…)`. `β = 0` gives the D-SG bound.
pub fn node_avg_var_bound(
    spectrum: &QuadSpectrum,
    beta: f64,
    sigma: f64,
    n: usize,
    d: usize,
    alpha: f64,
) -> Result<f64> {
    let max = dasg_mode_terms(spectrum, beta, alpha)?.into_iter().fold(0.0, f64::max);
    Ok(sigma * sigma / (n * d) as f64 * max)
}

/// `C_k = max{2k − 1, max_{γ₊ ≠ γ₋} (1 + max|γ_±|²)/|γ₊ − γ₋|}` for any `β`.
pub fn c_k_general(spectrum: &QuadSpectrum, beta: f64, k: u64) -> f64 {
    let base = (2 * k) as f64 - 1.0;
    spectrum.mu_list.iter().fold(base, |acc, &m| {
        let (p, q, gap) = momentum_roots(m, beta);
        if gap <= BOUNDARY_TOL {
            acc
        } else {
            acc.max((1.0 + p.max(q).powi(2)) / gap)
        }
    })
}

/// `C_k` for the momentum `(1 − √(αμ))/(1 + √(αμ))`:
/// `max{2k − 1, max_{0<μ_i<1−αμ} (1 + √(αμ) + (1 − √(αμ))μ_i)/(2√(μ_i(1 − αμ − μ_i)))}`.
///
/// Needs every `μ_i` in `[0, 1 − αμ]`, which holds when `λ_N > 0` and
/// `α ≤ λ_N/L`.
pub fn c_k_constant(spectrum: &QuadSpectrum, alpha: f64, mu: f64, k: u64) -> Result<f64> {
    let top = 1.0 - alpha * mu;
    if let Some(bad) = spectrum.mu_list.iter().find(|&&m| m < -BOUNDARY_TOL || m > top + BOUNDARY_TOL) {
        return Err(Error::RegimeViolation(format!("eigenvalue {bad} outside [0, 1 - alpha mu]")));
    }
    let s = (alpha * mu).sqrt();
    let base = (2 * k) as f64 - 1.0;
    Ok(spectrum.mu_list.iter().fold(base, |acc, &m| {
        if m > BOUNDARY_TOL && m < top - BOUNDARY_TOL {
            acc.max((1.0 + s + (1.0 - s) * m) / (2.0 * (m * (top - m)).sqrt()))
        } else {
            acc
        }
    }))
}

/// Inputs for [`finite_k_bounds_quadratic`].
#[derive(Debug, Clone)]
pub struct QuadBoundInputs {
    pub spectrum: QuadSpectrum,
    /// `0` for D-SG.
    pub beta: f64,
    pub sigma: f64,
    pub n: usize,
    pub d: usize,
    pub mu: f64,
    pub l: f64,
    pub lambda_n: f64,
    pub gamma: f64,
    pub c1: f64,
    /// `‖ξ₀‖²`: `‖x⁰ − x^∞‖²` for D-SG, the stacked two-step state for D-ASG.
    pub xi0_norm2: f64,
    pub init_dist2_opt: f64,
}

impl QuadBoundInputs {
    fn echo(&self) -> BoundInputs {
        BoundInputs {
            alpha: self.spectrum.alpha,
            beta: self.beta,
            sigma: self.sigma,
            n: self.n,
            mu: self.mu,
            l: self.l,
            lambda_n: self.lambda_n,
            gamma: self.gamma,
            c1: self.c1,
            init_dist2_fixed: self.xi0_norm2,
            init_dist2_opt: self.init_dist2_opt,
            v0: None,
        }
    }
}

/// Finite-k bounds built from the exact spectrum.
///
/// D-SG (`momentum = false`), against `x^∞`:
/// `ρ^{2k}(‖ξ₀‖² + α²σ²N/(1−ρ²)) + α²(σ²/d)Σ 1/(1−μ_i²)` with `ρ = max|μ_i|`.
/// Against `x*` (needs `α ≤ 1/(L+μ)`), `ρ` becomes `1 − αμ`, the first two
/// terms and the sum double, and the network term is added.
///
/// D-ASG: `C_k²ρ^{2k}(‖ξ₀‖² + α²σ²N/(1−ρ²)) + exact D-ASG variance`; against
/// `x*` the first bracket doubles and the network term is added.
pub fn finite_k_bounds_quadratic(
    ks: &[u64],
    inp: &QuadBoundInputs,
    momentum: bool,
    target: BoundTarget,
) -> Result<BoundReport> {
    let alpha = inp.spectrum.alpha;
    let (s2, n) = (inp.sigma * inp.sigma, inp.n as f64);
    let echo = inp.echo();
    let net = match target {
        BoundTarget::Fixed => 0.0,
        BoundTarget::Optimum => echo.network_term()?,
    };
    let scale = if target == BoundTarget::Optimum { 2.0 } else { 1.0 };
    let mut report = if !momentum {
        let exact = var_dsg_exact(&inp.spectrum, inp.sigma, inp.d, alpha)?;
        let rho = match target {
            BoundTarget::Fixed => inp.spectrum.rho_dsg(),
            BoundTarget::Optimum => 1.0 - alpha * inp.mu,
        };
        let transient = alpha * alpha * s2 * n / (1.0 - rho * rho);
        BoundReport::assemble("dsg", target, ks, &echo, |k| {
            let r = rho.powi(2).powf(k as f64);
            (scale * r * inp.xi0_norm2, scale * (r * transient + exact.variance), net)
        })
    } else {
        let exact = var_dasg_exact(&inp.spectrum, inp.beta, inp.sigma, inp.d, alpha)?;
        let rho = rho_dasg_quadratic(&inp.spectrum, inp.beta);
        let transient = alpha * alpha * s2 * n / (1.0 - rho * rho);
        BoundReport::assemble("dasg", target, ks, &echo, |k| {
            let ck = c_k_general(&inp.spectrum, inp.beta, k);
            let r = ck * ck * rho.powi(2).powf(k as f64);
            (scale * r * inp.xi0_norm2, scale * r * transient + exact.variance, net)
        })
    };
    report.summary.insert(
        "rho".into(),
        if momentum { rho_dasg_quadratic(&inp.spectrum, inp.beta) } else { inp.spectrum.rho_dsg() },
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::standard_beta;
    use crate::netgraph::{build_mixing, shift_mixing, Topology, WeightRule};
    use crate::objectives::QuadraticLocal;

    fn spectrum(mu_list: Vec<f64>, alpha: f64) -> QuadSpectrum {
        QuadSpectrum { mu_list, alpha }
    }

    #[test]
    fn single_node_spectrum() {
        let suite = ObjectiveSuite::quadratic(vec![QuadraticLocal::new(Matrix::diag(&[2.0]), vec![0.0], 0.0).unwrap()])
            .unwrap();
        let w = MixingMatrix::from_matrix(Matrix::identity(1)).unwrap();
        let s = aq_spectrum(&w, 0.1, &suite).unwrap();
        assert_eq!(s.mu_list.len(), 1);
        assert!((s.mu_list[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn commuting_case_shifts_mixing_spectrum() {
        let c = 1.5;
        let local = QuadraticLocal::new(Matrix::diag(&[c, c]), vec![0.0, 0.0], 0.0).unwrap();
        let suite = ObjectiveSuite::quadratic(vec![local; 4]).unwrap();
        let w = build_mixing(&Topology::Ring { n: 4 }, WeightRule::Metropolis).unwrap();
        let alpha = 0.2;
        let s = aq_spectrum(&w, alpha, &suite).unwrap();
        let mut expected: Vec<f64> = w.spectrum.iter().flat_map(|&l| [l - alpha * c; 2]).collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in s.mu_list.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_dasg_without_momentum_is_rho_dsg() {
        let s = spectrum(vec![0.9, 0.2, -0.95], 0.1);
        assert_eq!(rho_dasg_quadratic(&s, 0.0), 0.95);
    }

    #[test]
    fn rho_dasg_with_standard_momentum() {
        let (alpha, mu) = (0.04, 1.0);
        let top = 1.0 - alpha * mu;
        let s = spectrum(vec![top, 0.7, 0.3, 0.0], alpha);
        let r = rho_dasg_quadratic(&s, standard_beta(alpha, mu));
        assert!((r - (1.0 - (alpha * mu).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn scalar_dsg_variance() {
        let s = spectrum(vec![0.9], 0.1);
        let v = var_dsg_exact(&s, 1.0, 1, 0.1).unwrap();
        assert!((v.variance - 0.01 / 0.19).abs() < 1e-15);
        assert_eq!(var_dsg_exact(&s, 0.0, 1, 0.1).unwrap().variance, 0.0);
        assert!(matches!(var_dsg_exact(&spectrum(vec![1.0], 0.1), 1.0, 1, 0.1), Err(Error::UnstableSpectrum(_))));
    }

    #[test]
    fn dasg_variance_reduces_without_momentum() {
        let s = spectrum(vec![0.95, 0.5, -0.3, -0.8], 0.05);
        let a = var_dasg_exact(&s, 0.0, 1.3, 2, 0.05).unwrap();
        let b = var_dsg_exact(&s, 1.3, 2, 0.05).unwrap();
        assert!((a.variance - b.variance).abs() < 1e-14 * b.variance);
        assert!((a.j_inf - b.j_inf).abs() < 1e-14 * b.j_inf);
    }

    #[test]
    fn node_avg_bound_scales_inverse_in_n() {
        let s = spectrum(vec![0.9, 0.4], 0.1);
        let one = node_avg_var_bound(&s, 0.3, 1.0, 1, 2, 0.1).unwrap();
        let two = node_avg_var_bound(&s, 0.3, 1.0, 2, 2, 0.1).unwrap();
        assert!((one - 2.0 * two).abs() < 1e-15);
        let max = s.mu_list.iter().map(|&m| dasg_mode_term(m, 0.3, 0.1).unwrap()).fold(0.0, f64::max);
        assert!((one - max / 2.0).abs() < 1e-15);
    }

    #[test]
    fn c_k_branches() {
        let (alpha, mu) = (0.04, 1.0);
        let top = 1.0 - alpha * mu;
        let edge = spectrum(vec![top, 0.0], alpha);
        assert_eq!(c_k_constant(&edge, alpha, mu, 3).unwrap(), 5.0);
        assert!(c_k_constant(&edge, alpha, mu, 1).unwrap() >= 1.0);
        let inner = spectrum(vec![top, 0.5, 0.1], alpha);
        let beta = standard_beta(alpha, mu);
        for k in [1, 5, 20] {
            let a = c_k_constant(&inner, alpha, mu, k).unwrap();
            let b = c_k_general(&inner, beta, k);
            assert!((a - b).abs() < 1e-10 * a);
        }
        assert!(matches!(c_k_constant(&spectrum(vec![-0.2], alpha), alpha, mu, 1), Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn degenerate_denominator_is_rejected() {
        // μ_i = 1 zeroes the (1 − μ_i) factor
        assert!(matches!(dasg_mode_term(1.0, 0.5, 0.1), Err(Error::DegenerateEigenvalue(_))));
    }

    #[test]
    fn dsg_finite_k_limits() {
        let l = QuadraticLocal::new(Matrix::diag(&[1.0]), vec![1.0], 0.0).unwrap();
        let m = QuadraticLocal::new(Matrix::diag(&[3.0]), vec![-2.0], 0.0).unwrap();
        let suite = ObjectiveSuite::quadratic(vec![l, m]).unwrap();
        let w =
            shift_mixing(&build_mixing(&Topology::Complete { n: 2 }, WeightRule::Metropolis).unwrap(), 1.0).unwrap();
        let alpha = 0.1;
        let s = aq_spectrum(&w, alpha, &suite).unwrap();
        let inp = QuadBoundInputs {
            spectrum: s.clone(),
            beta: 0.0,
            sigma: 0.0,
            n: 2,
            d: 1,
            mu: suite.mu,
            l: suite.lipschitz,
            lambda_n: w.lambda_min,
            gamma: w.gamma,
            c1: suite.c1_constant(),
            xi0_norm2: 2.5,
            init_dist2_opt: 0.0,
        };
        let r = finite_k_bounds_quadratic(&[0, 10_000], &inp, false, BoundTarget::Fixed).unwrap();
        assert_eq!(r.total[0], 2.5);
        let noisy = QuadBoundInputs { sigma: 1.0, ..inp };
        let r = finite_k_bounds_quadratic(&[100_000], &noisy, false, BoundTarget::Fixed).unwrap();
        let exact = var_dsg_exact(&s, 1.0, 1, alpha).unwrap().variance;
        assert!((r.total[0] - exact).abs() < 1e-12);
    }
}
