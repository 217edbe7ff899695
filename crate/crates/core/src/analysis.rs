//! Closed-form rates, error bounds and certificates for general strongly
//! convex suites.
//!
//! Every bound splits into a *bias* term (decay of the initial error), a
//! *variance* term (noise floor) and a *network* term (offset between the
//! fixed point `x^∞` and the optimum `x*`). Bounds against `x^∞` carry no
//! network term.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::algorithms::{kappa_tilde, standard_beta};
use crate::error::{Error, Result};
use crate::linalg::{dist2_sq, dot, norm2_sq, Matrix};
use crate::netgraph::{assert_assumption3, MixingMatrix, LAMBDA_ZERO_TOL};
use crate::objectives::ObjectiveSuite;
use crate::oracles::symmetric_eigenvalues;

/// Residual target for the fixed-point solve.
pub const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITERS: usize = 10_000_000;
/// MI feasibility threshold on the smallest eigenvalue of the residual.
pub const MI_TOL: f64 = -1e-10;

/// `F_{W,α}(x) = (1/2α) xᵀ(I − 𝒲)x + F(x)`.
#[derive(Debug, Clone, Copy)]
pub struct PenalizedObjective<'a> {
    pub w: &'a MixingMatrix,
    pub alpha: f64,
    pub suite: &'a ObjectiveSuite,
    /// `(1 − λ_N)/α + L`.
    pub l_alpha: f64,
}

impl<'a> PenalizedObjective<'a> {
    pub fn new(w: &'a MixingMatrix, alpha: f64, suite: &'a ObjectiveSuite) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("alpha must be positive, got {alpha}")));
        }
        if w.node_count() != suite.node_count() {
            return Err(Error::DimensionMismatch { expected: suite.node_count(), got: w.node_count() });
        }
        let l_alpha = (1.0 - w.lambda_min) / alpha + suite.lipschitz;
        Ok(PenalizedObjective { w, alpha, suite, l_alpha })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let wx = self.w.mix(x, self.suite.dim());
        let quad = dot(x, x) - dot(x, &wx);
        Ok(quad / (2.0 * self.alpha) + self.suite.stacked_value(x)?)
    }

    /// `(I − 𝒲)x/α + ∇F(x)`.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.suite.stacked_grad(x)?;
        let wx = self.w.mix(x, self.suite.dim());
        for ((gi, xi), wi) in g.iter_mut().zip(x).zip(&wx) {
            *gi += (xi - wi) / self.alpha;
        }
        Ok(g)
    }
}

/// The noiseless fixed point `x^∞`, i.e. the minimizer of `F_{W,α}`.
///
/// Quadratic suites solve `(I − 𝒲 + α𝑄)x = αp` directly. Other suites run
/// constant-momentum accelerated gradient on `F_{W,α}` with step `1/L_α`
/// until `‖(I − 𝒲)x + α∇F(x)‖` and `‖∇F_{W,α}(x)‖` are both at most `1e-10`.
pub fn fixed_point(w: &MixingMatrix, alpha: f64, suite: &ObjectiveSuite) -> Result<Vec<f64>> {
    let pen = PenalizedObjective::new(w, alpha, suite)?;
    let nd = suite.node_count() * suite.dim();
    if suite.is_quadratic() {
        let q = suite.stacked_hessian()?;
        let a = Matrix::identity(nd).sub(&w.kron_identity(suite.dim())).add(&q.scale(alpha));
        let rhs: Vec<f64> = suite.stacked_linear()?.iter().map(|v| alpha * v).collect();
        let mut x = a.solve(&rhs)?;
        // one step of iterative refinement
        let r: Vec<f64> = rhs.iter().zip(a.matvec(&x)).map(|(b, ax)| b - ax).collect();
        let dx = a.solve(&r)?;
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        return Ok(x);
    }

    let stop = |g: &[f64]| norm2_sq(g).sqrt() * alpha.max(1.0) <= FIXED_POINT_TOL;
    let q = (suite.mu / pen.l_alpha).sqrt();
    let beta = (1.0 - q) / (1.0 + q);
    let mut x: Vec<f64> = (0..suite.node_count()).flat_map(|_| suite.x_star.iter().copied()).collect();
    let mut x_prev = x.clone();
    let mut y = x.clone();
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let g = pen.grad(&y)?;
        if stop(&g) {
            return Ok(y);
        }
        std::mem::swap(&mut x_prev, &mut x);
        for i in 0..nd {
            x[i] = y[i] - g[i] / pen.l_alpha;
        }
        for i in 0..nd {
            y[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
    }
    Err(Error::NoConvergence { what: "fixed-point solve", iters: FIXED_POINT_MAX_ITERS })
}

/// D-SG rate `max{|1 − αμ|, |λ_N − αL|}` for `0 < α < (1 + λ_N)/L`.
pub fn rho_dsg(alpha: f64, mu: f64, l: f64, lambda_n: f64) -> Result<f64> {
    let hi = (1.0 + lambda_n) / l;
    if !(alpha > 0.0 && alpha < hi) {
        return Err(Error::AlphaOutOfRange { alpha, lo: 0.0, hi });
    }
    Ok((1.0 - alpha * mu).abs().max((lambda_n - alpha * l).abs()))
}

/// Which distance a bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTarget {
    /// `E‖x^(k) − x^∞‖²`.
    Fixed,
    /// `E‖x^(k) − x*‖²`.
    Optimum,
}

/// Problem constants entering the bounds.
#[derive(Debug, Clone, Serialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub n: usize,
    pub mu: f64,
    pub l: f64,
    pub lambda_n: f64,
    pub gamma: f64,
    pub c1: f64,
    /// `‖x^(0) − x^∞‖²`.
    pub init_dist2_fixed: f64,
    /// `‖x^(0) − x*‖²` (stacked).
    pub init_dist2_opt: f64,
    /// `V_{S,α}(ξ₀)` with `x^(−1) = x^(0)`, when `λ_N > 0`.
    pub v0: Option<f64>,
}

impl BoundInputs {
    /// Evaluate every constant for `x^(−1) = x^(0) = x0`.
    pub fn gather(
        w: &MixingMatrix,
        suite: &ObjectiveSuite,
        sigma: f64,
        alpha: f64,
        beta: f64,
        x0: &[f64],
    ) -> Result<Self> {
        let x_inf = fixed_point(w, alpha, suite)?;
        let d = suite.dim();
        let init_dist2_opt = (0..suite.node_count()).map(|i| dist2_sq(&x0[i * d..(i + 1) * d], &suite.x_star)).sum();
        let v0 = if assert_assumption3(w) {
            let mut xi = Vec::with_capacity(2 * x0.len());
            for _ in 0..2 {
                xi.extend(x0.iter().zip(&x_inf).map(|(a, b)| a - b));
            }
            Some(lyapunov_value(&s_alpha(alpha, suite.mu), 1.0, alpha, &xi, w, suite, &x_inf)?)
        } else {
            None
        };
        Ok(BoundInputs {
            alpha,
            beta,
            sigma,
            n: suite.node_count(),
            mu: suite.mu,
            l: suite.lipschitz,
            lambda_n: w.lambda_min,
            gamma: w.gamma,
            c1: suite.c1_constant(),
            init_dist2_fixed: dist2_sq(x0, &x_inf),
            init_dist2_opt,
            v0,
        })
    }

    /// `2α²C₁²N/(1 − γ)²` after checking `α ≤ min{(1+λ_N)/L, 1/(L+μ)}`.
    pub fn network_term(&self) -> Result<f64> {
        let hi = ((1.0 + self.lambda_n) / self.l).min(1.0 / (self.l + self.mu));
        if !(self.alpha > 0.0 && self.alpha <= hi) {
            return Err(Error::AlphaOutOfRange { alpha: self.alpha, lo: 0.0, hi });
        }
        if self.c1 == 0.0 {
            return Ok(0.0);
        }
        Ok(2.0 * self.alpha * self.alpha * self.c1 * self.c1 * self.n as f64 / (1.0 - self.gamma).powi(2))
    }
}

/// Per-k bias / variance / network decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub method: String,
    pub target: BoundTarget,
    pub ks: Vec<u64>,
    pub bias: Vec<f64>,
    pub variance: Vec<f64>,
    pub network: Vec<f64>,
    pub total: Vec<f64>,
    pub inputs: BoundInputs,
    /// Scalar by-products such as robustness bounds.
    pub summary: BTreeMap<String, f64>,
    /// Caveats, e.g. constants that the analysis leaves as `O(1)`.
    pub flags: Vec<String>,
}

impl BoundReport {
    pub(crate) fn assemble(
        method: &str,
        target: BoundTarget,
        ks: &[u64],
        inputs: &BoundInputs,
        term: impl Fn(u64) -> (f64, f64, f64),
    ) -> Self {
        let mut report = BoundReport {
            method: method.to_string(),
            target,
            ks: ks.to_vec(),
            bias: Vec::with_capacity(ks.len()),
            variance: Vec::with_capacity(ks.len()),
            network: Vec::with_capacity(ks.len()),
            total: Vec::with_capacity(ks.len()),
            inputs: inputs.clone(),
            summary: BTreeMap::new(),
            flags: Vec::new(),
        };
        for &k in ks {
            let (b, v, n) = term(k);
            report.bias.push(b);
            report.variance.push(v);
            report.network.push(n);
            report.total.push(b + v + n);
        }
        report
    }

    /// Bound value at iteration `k`, if it was evaluated.
    pub fn at(&self, k: u64) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.total[i])
    }
}

/// D-SG bound.
///
/// `Fixed`: `ρ^{2k}‖x⁰ − x^∞‖² + (1 − ρ^{2k})/(1 − ρ²)·σ²α²N` for
/// `α < (1+λ_N)/L`. `Optimum`: `2(1−αμ)^{2k}‖x⁰ − x^∞‖²
/// + 2ασ²N(1 − (1−αμ)^{2k})/(μ(2−αμ)) + 2α²C₁²N/(1−γ)²` for `α ≤ 1/(L+μ)`.
pub fn dsg_bound(ks: &[u64], inp: &BoundInputs, target: BoundTarget) -> Result<BoundReport> {
    let rho = rho_dsg(inp.alpha, inp.mu, inp.l, inp.lambda_n)?;
    let (a, s2, n) = (inp.alpha, inp.sigma * inp.sigma, inp.n as f64);
    let am = a * inp.mu;
    let mut report = match target {
        BoundTarget::Fixed => BoundReport::assemble("dsg", target, ks, inp, |k| {
            let r2k = rho.powi(2).powf(k as f64);
            let var = if rho == 0.0 {
                s2 * a * a * n * f64::from(k > 0)
            } else {
                (1.0 - r2k) / (1.0 - rho * rho) * s2 * a * a * n
            };
            (r2k * inp.init_dist2_fixed, var, 0.0)
        }),
        BoundTarget::Optimum => {
            let net = inp.network_term()?;
            BoundReport::assemble("dsg", target, ks, inp, |k| {
                let c2k = (1.0 - am).powi(2).powf(k as f64);
                (2.0 * c2k * inp.init_dist2_fixed, 2.0 * a * s2 * n * (1.0 - c2k) / (inp.mu * (2.0 - am)), net)
            })
        }
    };
    report.summary.insert("rho".into(), rho);
    report.summary.insert("j_inf_bound".into(), a * a / (1.0 - rho * rho));
    if a < (1.0 + inp.lambda_n) / (inp.l + inp.mu) {
        report.summary.insert("j_inf_bound_mu".into(), a / (inp.mu * (2.0 - am)));
    }
    Ok(report)
}

/// D-ASG bound with the momentum `(1 − √(αμ))/(1 + √(αμ))`.
///
/// `Fixed`: `2(1−√(αμ))^k V_{S,α}(ξ₀)/μ + σ²N√α(2 − λ_N + αL)/(μ√μ)` for
/// `0 < α ≤ λ_N/L`. `Optimum` doubles both terms and adds the network term,
/// and additionally needs `α ≤ 1/(L+μ)`.
pub fn dasg_bound(ks: &[u64], inp: &BoundInputs, target: BoundTarget) -> Result<BoundReport> {
    if inp.lambda_n <= LAMBDA_ZERO_TOL {
        return Err(Error::Assumption3Violated { lambda_n: inp.lambda_n });
    }
    let hi = inp.lambda_n / inp.l;
    if !(inp.alpha > 0.0 && inp.alpha <= hi) {
        return Err(Error::AlphaOutOfRange { alpha: inp.alpha, lo: 0.0, hi });
    }
    let v0 = inp.v0.ok_or_else(|| Error::ParameterOutOfRange("initial Lyapunov value missing".into()))?;
    let (a, mu) = (inp.alpha, inp.mu);
    let rate = 1.0 - (a * mu).sqrt();
    let var = inp.sigma * inp.sigma * inp.n as f64 * a.sqrt() * (2.0 - inp.lambda_n + a * inp.l) / (mu * mu.sqrt());
    let (scale, net) = match target {
        BoundTarget::Fixed => (1.0, 0.0),
        BoundTarget::Optimum => (2.0, inp.network_term()?),
    };
    let mut report = BoundReport::assemble("dasg", target, ks, inp, |k| {
        (scale * 2.0 * rate.powf(k as f64) * v0 / mu, scale * var, net)
    });
    report.summary.insert("rate".into(), rate);
    report.summary.insert("j_inf_bound".into(), a.sqrt() * (2.0 - inp.lambda_n + a * inp.l) / (mu * mu.sqrt()));
    if (inp.beta - standard_beta(a, mu)).abs() > 1e-12 {
        report.flags.push("bound assumes beta = (1-sqrt(alpha mu))/(1+sqrt(alpha mu))".into());
    }
    Ok(report)
}

/// D-ASG bound from an arbitrary MI certificate `(ρ, P̃)`:
/// `ρ^{2k}·2V_{P,α,1}(ξ₀)/μ + 2α²σ²N/(μ(1−ρ²))·(P̃₁₁ + (1 − λ_N + αL)/(2α))`.
pub fn dasg_general_bound(ks: &[u64], inp: &BoundInputs, cert: &MiCertificate, v0: f64) -> Result<BoundReport> {
    if !cert.feasible {
        return Err(Error::ParameterOutOfRange("certificate is not feasible".into()));
    }
    let (a, mu, rho) = (inp.alpha, inp.mu, cert.rho);
    let noise_gain = cert.p_tilde[0][0] + (1.0 - inp.lambda_n + a * inp.l) / (2.0 * a);
    let var = 2.0 * a * a * inp.sigma * inp.sigma * inp.n as f64 / (mu * (1.0 - rho * rho)) * noise_gain;
    let mut report = BoundReport::assemble("dasg", BoundTarget::Fixed, ks, inp, |k| {
        (rho.powi(2).powf(k as f64) * 2.0 * v0 / mu, var, 0.0)
    });
    report.summary.insert("j_inf_bound".into(), 2.0 * a * a / (mu * (1.0 - rho * rho)) * noise_gain);
    Ok(report)
}

/// `S̃_α = vvᵀ` with `v = (1/√(2α), √(μ/2) − 1/√(2α))`.
pub fn s_alpha(alpha: f64, mu: f64) -> Matrix {
    let v0 = 1.0 / (2.0 * alpha).sqrt();
    let v1 = (mu / 2.0).sqrt() - v0;
    Matrix::from_rows(&[vec![v0 * v0, v0 * v1], vec![v1 * v0, v1 * v1]])
}

/// Outcome of checking the 3×3 matrix inequality for a given `(ρ, P̃)`.
#[derive(Debug, Clone, Serialize)]
pub struct MiCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub p_tilde: [[f64; 2]; 2],
    /// Smallest eigenvalue of the residual `M`.
    pub min_eig_slack: f64,
    pub feasible: bool,
}

/// Assemble `M = ρ²X̃₁ + (1 − ρ²)X̃₂ − [ÃᵀP̃Ã − ρ²P̃, ÃᵀP̃B̃; B̃ᵀP̃Ã, B̃ᵀP̃B̃]`
/// with `Ã = [[1+β, −β], [1, 0]]`, `B̃ = [−α; 0]`, and report its smallest
/// eigenvalue.
pub fn mi_check(
    alpha: f64,
    beta: f64,
    rho: f64,
    p_tilde: &Matrix,
    mu: f64,
    l: f64,
    lambda_n: f64,
) -> Result<MiCertificate> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    if p_tilde.rows() != 2 || p_tilde.cols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: p_tilde.rows() });
    }
    let scale = p_tilde.max_abs().max(f64::MIN_POSITIVE);
    if p_tilde.asymmetry() > 1e-12 * scale || symmetric_eigenvalues(p_tilde)?[1] < -1e-12 * scale {
        return Err(Error::NonPsdInput);
    }
    let b = beta;
    let e = alpha * (1.0 + lambda_n - l * alpha) / 2.0;
    let x1 = Matrix::from_rows(&[
        vec![b * b * mu / 2.0, -b * b * mu / 2.0, -b / 2.0],
        vec![-b * b * mu / 2.0, b * b * mu / 2.0, b / 2.0],
        vec![-b / 2.0, b / 2.0, e],
    ]);
    let x2 = Matrix::from_rows(&[
        vec![(1.0 + b).powi(2) * mu / 2.0, -b * (1.0 + b) * mu / 2.0, -(1.0 + b) / 2.0],
        vec![-b * (1.0 + b) * mu / 2.0, b * b * mu / 2.0, b / 2.0],
        vec![-(1.0 + b) / 2.0, b / 2.0, e],
    ]);
    let a = Matrix::from_rows(&[vec![1.0 + b, -b], vec![1.0, 0.0]]);
    let bm = Matrix::from_rows(&[vec![-alpha], vec![0.0]]);
    let r2 = rho * rho;
    let apa = a.transpose().matmul(p_tilde).matmul(&a).sub(&p_tilde.scale(r2));
    let apb = a.transpose().matmul(p_tilde).matmul(&bm);
    let bpb = bm.transpose().matmul(p_tilde).matmul(&bm);
    let rhs = Matrix::block2(&apa, &apb, &apb.transpose(), &bpb);
    let m = x1.scale(r2).add(&x2.scale(1.0 - r2)).sub(&rhs);
    let min_eig = *symmetric_eigenvalues(&m)?.last().unwrap();
    Ok(MiCertificate {
        alpha,
        beta,
        rho,
        p_tilde: [[p_tilde[(0, 0)], p_tilde[(0, 1)]], [p_tilde[(1, 0)], p_tilde[(1, 1)]]],
        min_eig_slack: min_eig,
        feasible: min_eig >= MI_TOL,
    })
}

/// Check the explicit certificate `P̃ = S̃_α` with the momentum
/// `(1 − √(αμ))/(1 + √(αμ))`.
///
/// The Lyapunov function contracts by `1 − √(αμ)` per step, which is `ρ²` in
/// the inequality, so the check uses `ρ = √(1 − √(αμ))`.
pub fn certify_s_alpha(alpha: f64, mu: f64, l: f64, lambda_n: f64) -> Result<MiCertificate> {
    if lambda_n <= LAMBDA_ZERO_TOL {
        return Err(Error::Assumption3Violated { lambda_n });
    }
    let hi = lambda_n / l;
    if !(alpha > 0.0 && alpha <= hi * (1.0 + 1e-12)) {
        return Err(Error::AlphaOutOfRange { alpha, lo: 0.0, hi });
    }
    let rho = (1.0 - (alpha * mu).sqrt()).sqrt();
    mi_check(alpha, standard_beta(alpha, mu), rho, &s_alpha(alpha, mu), mu, l, lambda_n)
}

/// `V = ξᵀ(P̃ ⊗ I)ξ + c[F_{W,α}(ξ_top + x^∞) − F_{W,α}(x^∞)]` for a state
/// `ξ = (x^(k) − x^∞, x^(k−1) − x^∞)`.
pub fn lyapunov_value(
    p_tilde: &Matrix,
    c: f64,
    alpha: f64,
    xi: &[f64],
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    x_inf: &[f64],
) -> Result<f64> {
    let nd = x_inf.len();
    if xi.len() != 2 * nd {
        return Err(Error::DimensionMismatch { expected: 2 * nd, got: xi.len() });
    }
    let (top, bottom) = xi.split_at(nd);
    let quad = p_tilde[(0, 0)] * dot(top, top)
        + (p_tilde[(0, 1)] + p_tilde[(1, 0)]) * dot(top, bottom)
        + p_tilde[(1, 1)] * dot(bottom, bottom);
    if c == 0.0 {
        return Ok(quad);
    }
    let pen = PenalizedObjective::new(w, alpha, suite)?;
    let shifted: Vec<f64> = top.iter().zip(x_inf).map(|(a, b)| a + b).collect();
    let gap = (pen.value(&shifted)? - pen.value(x_inf)?).max(0.0);
    Ok(quad + c * gap)
}

/// Result of the rate/robustness trade-off program.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tradeoff {
    pub alpha_star: f64,
    pub j_tot: f64,
    pub alpha_bar: f64,
    pub rho_star: f64,
    pub delta: f64,
}

/// Constants of the trade-off objective.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TradeoffParams {
    pub mu: f64,
    pub l: f64,
    pub lambda_n: f64,
    pub sigma: f64,
    pub n: usize,
    pub c1: f64,
    pub gamma: f64,
}

impl TradeoffParams {
    /// `min(λ_N/L, 1/(L+μ))`.
    pub fn alpha_bar(&self) -> f64 {
        (self.lambda_n / self.l).min(1.0 / (self.l + self.mu))
    }

    /// `J_tot(α) = 2σ²Nα(2 − λ_N + αL)/(μ√(αμ)) + 2C₁²Nα²/(1−γ)²`.
    pub fn j_tot(&self, alpha: f64) -> f64 {
        self.g(alpha.sqrt())
    }

    /// `J_tot` as a function of `z = √α`.
    pub fn g(&self, z: f64) -> f64 {
        let n = self.n as f64;
        let var =
            2.0 * self.sigma * self.sigma * n / (self.mu * self.mu.sqrt()) * z * (2.0 - self.lambda_n + z * z * self.l);
        var + self.network_coeff() * z.powi(4)
    }

    /// Derivative of [`TradeoffParams::g`].
    pub fn g_prime(&self, z: f64) -> f64 {
        let n = self.n as f64;
        let c = self.sigma * self.sigma * n / (self.mu * self.mu.sqrt());
        2.0 * c * (2.0 - self.lambda_n) + 6.0 * c * self.l * z * z + 4.0 * self.network_coeff() * z.powi(3)
    }

    fn network_coeff(&self) -> f64 {
        if self.c1 == 0.0 {
            0.0
        } else {
            2.0 * self.c1 * self.c1 * self.n as f64 / (1.0 - self.gamma).powi(2)
        }
    }
}

/// Smallest `J_tot` subject to the rate `1 − √(αμ) ≤ ρ*(1+δ)`:
/// `α* = (1 − ρ*(1+δ))²/μ` with `ρ* = 1 − √(ᾱμ)`.
pub fn tradeoff_alpha(delta: f64, params: &TradeoffParams) -> Result<Tradeoff> {
    if params.lambda_n <= LAMBDA_ZERO_TOL {
        return Err(Error::Assumption3Violated { lambda_n: params.lambda_n });
    }
    let alpha_bar = params.alpha_bar();
    let rho_star = 1.0 - (alpha_bar * params.mu).sqrt();
    let max = 1.0 / rho_star - 1.0;
    if !(delta >= 0.0 && delta <= max) {
        return Err(Error::DeltaOutOfRange { delta, max });
    }
    let alpha_star = (1.0 - rho_star * (1.0 + delta)).powi(2) / params.mu;
    Ok(Tradeoff { alpha_star, j_tot: params.j_tot(alpha_star), alpha_bar, rho_star, delta })
}

/// Constants for the multistage bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MasgInputs {
    pub n: usize,
    pub sigma: f64,
    pub mu: f64,
    pub l: f64,
    pub lambda_n: f64,
    pub gamma: f64,
    pub c1: f64,
    /// `‖x^(0) − x*‖²` (stacked).
    pub init_dist2_opt: f64,
}

impl MasgInputs {
    pub fn kappa_tilde(&self) -> f64 {
        kappa_tilde(self.mu, self.l, self.lambda_n)
    }

    fn network_scale(&self) -> f64 {
        if self.c1 == 0.0 {
            0.0
        } else {
            (self.c1 * self.lambda_n / (self.l * (1.0 - self.gamma))).powi(2)
        }
    }
}

/// Stage-boundary bound at `L_{t+1} = k₁ + … + k_{t+1}`:
/// `4·2^{−(p−2)t}e^{−k₁/√κ̃}‖x⁰−x*‖² + 12Nσ²/(2^tμ²√κ̃) + 12N·2^{−4t}(C₁λ_N/(L(1−γ)))²`.
pub fn masg_stage_bound(t: u32, k1: usize, p: f64, inp: &MasgInputs) -> Result<(f64, f64, f64)> {
    if p < 7.0 {
        return Err(Error::ParameterOutOfRange(format!("p must be at least 7, got {p}")));
    }
    if inp.lambda_n <= LAMBDA_ZERO_TOL {
        return Err(Error::Assumption3Violated { lambda_n: inp.lambda_n });
    }
    let kt = inp.kappa_tilde();
    let n = inp.n as f64;
    let tf = f64::from(t);
    let bias = 4.0 * 2f64.powf(-(p - 2.0) * tf) * (-(k1 as f64) / kt.sqrt()).exp() * inp.init_dist2_opt;
    let var = 12.0 * n * inp.sigma * inp.sigma / (2f64.powf(tf) * inp.mu * inp.mu * kt.sqrt());
    let net = 12.0 * n * 2f64.powf(-4.0 * tf) * inp.network_scale();
    Ok((bias, var, net))
}

/// Stage-boundary bounds for `t = 0, …, stages−1`, reported at the global
/// iteration counts `L_{t+1}` given by `boundaries`.
pub fn masg_bound(boundaries: &[usize], k1: usize, p: f64, inp: &MasgInputs, alpha1: f64) -> Result<BoundReport> {
    let terms = (0..boundaries.len()).map(|t| masg_stage_bound(t as u32, k1, p, inp)).collect::<Result<Vec<_>>>()?;
    let ks: Vec<u64> = boundaries.iter().map(|&b| b as u64).collect();
    let echo = BoundInputs {
        alpha: alpha1,
        beta: standard_beta(alpha1, inp.mu),
        sigma: inp.sigma,
        n: inp.n,
        mu: inp.mu,
        l: inp.l,
        lambda_n: inp.lambda_n,
        gamma: inp.gamma,
        c1: inp.c1,
        init_dist2_fixed: f64::NAN,
        init_dist2_opt: inp.init_dist2_opt,
        v0: None,
    };
    let mut report = BoundReport::assemble("dmasg", BoundTarget::Optimum, &ks, &echo, |k| {
        let t = ks.iter().position(|&x| x == k).unwrap();
        terms[t]
    });
    report.summary.insert("kappa_tilde".into(), inp.kappa_tilde());
    report.summary.insert("k1".into(), k1 as f64);
    report.summary.insert("p".into(), p);
    Ok(report)
}

/// Any-`k` D-MASG bound for `k > k₁`, with the unprinted `O(1)` constant set to 1:
/// `(6p√κ̃/(k−k₁))^{p−2}e^{−k₁/√κ̃}‖x⁰−x*‖² + Npσ²/(μ²(k−k₁)) + Np⁴C₁²/((1−γ)²μ²(k−k₁)⁴)`.
pub fn masg_any_k_bound(ks: &[u64], k1: usize, p: f64, inp: &MasgInputs) -> Result<BoundReport> {
    if let Some(&bad) = ks.iter().find(|&&k| k as usize <= k1) {
        return Err(Error::ParameterOutOfRange(format!("k = {bad} must exceed k1 = {k1}")));
    }
    let kt = inp.kappa_tilde();
    let n = inp.n as f64;
    let (mu2, s2) = (inp.mu * inp.mu, inp.sigma * inp.sigma);
    let net_c = if inp.c1 == 0.0 { 0.0 } else { n * p.powi(4) * inp.c1 * inp.c1 / ((1.0 - inp.gamma).powi(2) * mu2) };
    let echo = masg_echo(inp);
    let mut report = BoundReport::assemble("dmasg", BoundTarget::Optimum, ks, &echo, |k| {
        let m = (k as usize - k1) as f64;
        (
            (6.0 * p * kt.sqrt() / m).powf(p - 2.0) * (-(k1 as f64) / kt.sqrt()).exp() * inp.init_dist2_opt,
            n * p * s2 / (mu2 * m),
            net_c / m.powi(4),
        )
    });
    report.flags.push("up to an unspecified O(1) factor".into());
    Ok(report)
}

fn masg_echo(inp: &MasgInputs) -> BoundInputs {
    BoundInputs {
        alpha: f64::NAN,
        beta: f64::NAN,
        sigma: inp.sigma,
        n: inp.n,
        mu: inp.mu,
        l: inp.l,
        lambda_n: inp.lambda_n,
        gamma: inp.gamma,
        c1: inp.c1,
        init_dist2_fixed: f64::NAN,
        init_dist2_opt: inp.init_dist2_opt,
        v0: None,
    }
}

/// Iteration count for an `ε`-accurate solution, up to `O(1)`:
/// `√κ̃ ln(Δ/ε) + Nσ²/(μ²ε) + N^{1/4}√(C₁/(1−γ))/(√μ ε^{1/4})`.
pub fn masg_epsilon_complexity(eps: f64, delta: f64, inp: &MasgInputs) -> Result<f64> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::ParameterOutOfRange("epsilon and the initial gap must be positive".into()));
    }
    let n = inp.n as f64;
    let bias = inp.kappa_tilde().sqrt() * (delta / eps).ln().max(0.0);
    let var = n * inp.sigma * inp.sigma / (inp.mu * inp.mu * eps);
    let net = if inp.c1 == 0.0 {
        0.0
    } else {
        n.powf(0.25) * (inp.c1 / (1.0 - inp.gamma)).sqrt() / (inp.mu.sqrt() * eps.powf(0.25))
    };
    Ok(bias + var + net)
}

/// Stepsize cap under relative noise: `min{λ_N/L, μ³/(60η²)²}` for `η > 0`,
/// otherwise `λ_N/L`.
pub fn hat_alpha_relative(mu: f64, l: f64, lambda_n: f64, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::ParameterOutOfRange(format!("eta must be nonnegative, got {eta}")));
    }
    let base = lambda_n / l;
    if eta == 0.0 {
        return Ok(base);
    }
    Ok(base.min(mu.powi(3) / (60.0 * eta * eta).powi(2)))
}
