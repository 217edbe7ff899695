//! Brute-force numerical verifiers.
//!
//! These routines are deliberately simple and independent of the closed-form
//! machinery in [`crate::analysis`] and [`crate::quadratic_exact`]: a cyclic
//! Jacobi eigensolver, fixed-point iteration for the discrete Lyapunov
//! equation, power iteration for spectral radii, Monte-Carlo stationary
//! moments and central finite differences. The Jacobi solver doubles as the
//! production eigensolver for mixing matrices and quadratic iteration
//! matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2_sq, Matrix};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues sorted in non-increasing order.
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector of `values[j]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
/// drops below `1e-12` relative to the matrix norm (and keeps sweeping while
/// rotations still make progress), for at most 100 sweeps.
pub fn jacobi_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    let n = a.rows();
    let mut m = a.clone();
    // symmetrize so rounding asymmetry in callers does not leak in
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();
    let off = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    };

    let mut converged = scale == 0.0 || off(&m) <= JACOBI_TOL * scale;
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let before = off(&m);
        if before == 0.0 || before <= f64::EPSILON * 1e-3 * scale {
            converged = true;
            break;
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // skip rotations that would not change the diagonal in floating point
                if apq.abs() < f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        let after = off(&m);
        if after <= JACOBI_TOL * scale {
            converged = true;
        }
        if !rotated || (converged && after >= before) {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "Jacobi eigensolver", iters: JACOBI_MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues of a symmetric matrix, non-increasing.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    Ok(jacobi_eigen(a)?.values)
}

/// Spectral (operator 2-) norm via the largest eigenvalue of `AᵀA`.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    let gram = a.transpose().matmul(a);
    let top = symmetric_eigenvalues(&gram)?.first().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

/// Fixed point of the discrete Lyapunov recursion.
#[derive(Debug, Clone)]
pub struct LyapunovResult {
    pub sigma: Matrix,
    pub trace: f64,
    pub iterations: usize,
    /// `‖AΣAᵀ + Σ_w − Σ‖_F` at the returned `Σ`.
    pub residual: f64,
}

/// Iterate `Σ ← AΣAᵀ + Σ_w` from `Σ = 0` until successive iterates differ by at
/// most `tol` in Frobenius norm.
pub fn lyapunov_iterate(a: &Matrix, sigma_w: &Matrix, tol: f64, max_iter: usize) -> Result<LyapunovResult> {
    if !a.is_square() || sigma_w.rows() != a.rows() || !sigma_w.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: sigma_w.rows() });
    }
    let rho = power_spectral_radius(a, 1e-10, 200_000)?;
    if rho >= 1.0 {
        return Err(Error::UnstableSpectrum(rho));
    }
    let at = a.transpose();
    let mut sigma = Matrix::zeros(a.rows(), a.cols());
    for it in 1..=max_iter {
        let next = a.matmul(&sigma).matmul(&at).add(sigma_w);
        let change = next.sub(&sigma).frobenius_norm();
        sigma = next;
        if change <= tol {
            let residual = a.matmul(&sigma).matmul(&at).add(sigma_w).sub(&sigma).frobenius_norm();
            let trace = sigma.trace();
            return Ok(LyapunovResult { sigma, trace, iterations: it, residual });
        }
    }
    Err(Error::NoConvergence { what: "Lyapunov iteration", iters: max_iter })
}

/// Modulus of the dominant eigenvalue of a general square matrix.
///
/// Normalized power iteration. Each step takes the larger Ritz value modulus
/// on the Krylov plane `span{x, Ax}`, so a dominant complex-conjugate pair, a
/// `±λ` pair or a 2×2 Jordan block is resolved exactly once the iterate lives
/// in the dominant invariant plane.
/// The estimate is accepted when it is stable to `tol` across a window of
/// iterations; after a quarter of the budget without settling the iteration
/// restarts from a fresh random vector. If the budget runs out (two dominant
/// moduli too close to separate), the result of
/// [`gelfand_spectral_radius`] is returned instead.
pub fn power_spectral_radius(a: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    let n = a.rows();
    if n == 0 || a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::ParameterOutOfRange("matrix has non-finite entries".into()));
    }
    const WINDOW: usize = 64;
    let restart_every = (max_iter / 4).max(4 * WINDOW);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed0f_9a11);
    let mut total = 0;
    while total < max_iter {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        normalize(&mut x);
        let mut history: Vec<f64> = Vec::with_capacity(restart_every);
        for _ in 0..restart_every {
            total += 1;
            let x1 = a.matvec(&x);
            let x2 = a.matvec(&x1);
            let n1 = norm2_sq(&x1).sqrt();
            if n1 == 0.0 {
                // x landed in the null space; the dominant modulus of a
                // nilpotent-on-this-start matrix cannot be resolved, restart
                break;
            }
            let est = two_step_estimate(&x, &x1, &x2);
            history.push(est);
            if history.len() > WINDOW {
                let old = history[history.len() - 1 - WINDOW];
                let mid = history[history.len() - 1 - WINDOW / 2];
                let scale = est.abs().max(f64::MIN_POSITIVE);
                if (est - old).abs() <= 0.1 * tol * scale.max(1e-300)
                    && (est - mid).abs() <= 0.1 * tol * scale.max(1e-300)
                {
                    return Ok(est);
                }
            }
            x = x1;
            normalize(&mut x);
            if total >= max_iter {
                break;
            }
        }
    }
    log::debug!("power iteration stagnated after {max_iter} steps, using repeated squaring");
    gelfand_spectral_radius(a)
}

/// `ρ(A) = lim ‖A^m‖^{1/m}` evaluated at `m = 2^60` by repeated squaring with
/// renormalization.
///
/// The Frobenius norm satisfies `ρ^m ≤ ‖A^m‖ ≤ c·m^s·ρ^m`, so the relative
/// error is `O(log(c m^s)/m)`.
pub fn gelfand_spectral_radius(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::ParameterOutOfRange("matrix has non-finite entries".into()));
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut m = a.scale(1.0 / norm);
    // log‖A^(2^j)‖ = 2^j · log_scale
    let mut log_scale = norm.ln();
    for j in 1..=60 {
        let sq = m.matmul(&m);
        let n = sq.frobenius_norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        log_scale += n.ln() / 2f64.powi(j);
        m = sq.scale(1.0 / n);
    }
    Ok(log_scale.exp())
}

fn normalize(x: &mut [f64]) {
    let n = norm2_sq(x).sqrt();
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}

/// Dominant Ritz value modulus of `A` on the plane spanned by `x0` (unit)
/// and `x1 = A x0`, given `x2 = A x1`. Falls back to the one-step Rayleigh
/// quotient when `x1` is parallel to `x0`.
fn two_step_estimate(x0: &[f64], x1: &[f64], x2: &[f64]) -> f64 {
    let c0 = dot(x0, x1);
    let mut u: Vec<f64> = x1.iter().zip(x0).map(|(a, b)| a - c0 * b).collect();
    let corr = dot(&u, x0);
    u.iter_mut().zip(x0).for_each(|(a, b)| *a -= corr * b);
    let c1 = norm2_sq(&u).sqrt();
    if c1 <= 1e-13 * norm2_sq(x1).sqrt() {
        return c0.abs();
    }
    let q1: Vec<f64> = u.iter().map(|v| v / c1).collect();
    // A q1 = (x2 − (c0 + corr)·x1)/c1
    let shift = c0 + corr;
    let aq1: Vec<f64> = x2.iter().zip(x1).map(|(a, b)| (a - shift * b) / c1).collect();
    let h00 = c0;
    let h10 = dot(&q1, x1);
    let h01 = dot(x0, &aq1);
    let h11 = dot(&q1, &aq1);
    let half_tr = 0.5 * (h00 + h11);
    let det = h00 * h11 - h01 * h10;
    let disc = half_tr * half_tr - det;
    if disc < 0.0 {
        det.sqrt()
    } else {
        let s = disc.sqrt();
        (half_tr + s).abs().max((half_tr - s).abs())
    }
}

/// A stochastic recursion observed through one scalar statistic per step.
pub trait StationaryChain {
    /// Advance one step and return the statistic at the new state.
    fn advance(&mut self) -> f64;
}

impl<F: FnMut() -> f64> StationaryChain for F {
    fn advance(&mut self) -> f64 {
        self()
    }
}

/// Monte-Carlo estimate with its standard error across replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

impl McEstimate {
    /// `true` when `value` lies within `z` standard errors of the mean.
    pub fn within(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= z * self.stderr
    }
}

/// Tail-averaged stationary statistic.
///
/// Every replicate runs `burn_in` discarded steps, then averages the next
/// `samples` statistics; the replicate averages are independent, so their
/// sample standard deviation over `√replicates` is the standard error.
/// `make_chain(r)` must derive all randomness from `r` for the result to be
/// reproducible.
pub fn mc_stationary_variance<F, C>(make_chain: F, burn_in: usize, samples: usize, replicates: usize) -> McEstimate
where
    F: Fn(u64) -> C + Sync,
    C: StationaryChain,
{
    assert!(samples > 0 && replicates > 0);
    let per_replicate: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut chain = make_chain(r);
            for _ in 0..burn_in {
                chain.advance();
            }
            let mut acc = 0.0;
            for _ in 0..samples {
                acc += chain.advance();
            }
            acc / samples as f64
        })
        .collect();
    summarize(&per_replicate)
}

/// Mean and standard error of independent samples.
pub fn summarize(values: &[f64]) -> McEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return McEstimate { mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    McEstimate { mean, stderr: (var / n).sqrt() }
}

/// Central finite-difference gradient with step `h` in every coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
