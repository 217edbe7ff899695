//! Gradient-noise models and reproducible per-(replicate, node, iteration)
//! random streams.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist2_sq;
use crate::objectives::ObjectiveSuite;

/// Stochastic gradient oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    Exact,
    /// Additive `N(0, (σ²/d) I)`, total variance `σ²` per node.
    GaussianIso { sigma: f64 },
    /// Additive isotropic Gaussian with total variance `σ² + (η²/2)‖x − x*‖²`.
    Relative { sigma: f64, eta: f64 },
    /// Logistic data term over a uniform subsample of `⌈b·n_i⌉` rows.
    Minibatch { b: f64 },
}

impl NoiseSpec {
    pub fn validate(&self, suite: &ObjectiveSuite) -> Result<()> {
        match *self {
            NoiseSpec::Exact => Ok(()),
            NoiseSpec::GaussianIso { sigma } => check_nonneg("sigma", sigma),
            NoiseSpec::Relative { sigma, eta } => {
                check_nonneg("sigma", sigma)?;
                check_nonneg("eta", eta)
            }
            NoiseSpec::Minibatch { b } => {
                if !suite.is_quadratic() {
                    if b > 0.0 && b <= 1.0 {
                        Ok(())
                    } else {
                        Err(Error::ParameterOutOfRange(format!("batch proportion {b} not in (0, 1]")))
                    }
                } else {
                    Err(Error::MinibatchOnQuadratic)
                }
            }
        }
    }

    /// Per-node variance level `σ` when it is known in closed form.
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            NoiseSpec::Exact => Some(0.0),
            NoiseSpec::GaussianIso { sigma } | NoiseSpec::Relative { sigma, .. } => Some(sigma),
            NoiseSpec::Minibatch { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, NoiseSpec::Exact) || matches!(self, NoiseSpec::Minibatch { b } if *b == 1.0)
    }

    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match *self {
            NoiseSpec::Exact => "exact".into(),
            NoiseSpec::GaussianIso { sigma } => format!("gauss{sigma}"),
            NoiseSpec::Relative { sigma, eta } => format!("rel{sigma}_{eta}"),
            NoiseSpec::Minibatch { b } => format!("batch{b}"),
        }
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

/// Counter-based stream: the generator for node `i` at iteration `k` of
/// replicate `r` depends only on `(master, r, i, k)`.
pub fn stream_rng(master: u64, replicate: u64, node: u64, iteration: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (chunk, word) in seed.chunks_exact_mut(8).zip([master, replicate, node, iteration]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Exact gradient plus a draw from `spec`, written into `out`.
///
/// The caller guarantees `i < N` and `x.len() == d`.
pub fn sample_gradient_into(
    spec: &NoiseSpec,
    suite: &ObjectiveSuite,
    i: usize,
    x: &[f64],
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) {
    let d = x.len();
    match *spec {
        NoiseSpec::Exact => suite.grad_local_into(i, x, out),
        NoiseSpec::GaussianIso { sigma } => {
            suite.grad_local_into(i, x, out);
            add_iso(out, sigma * sigma, d, rng);
        }
        NoiseSpec::Relative { sigma, eta } => {
            suite.grad_local_into(i, x, out);
            let var = sigma * sigma + 0.5 * eta * eta * dist2_sq(x, &suite.x_star);
            add_iso(out, var, d, rng);
        }
        NoiseSpec::Minibatch { b } => {
            let local = &suite.logistic_locals().expect("minibatch validated against suite")[i];
            let n = local.samples();
            let m = ((b * n as f64).ceil() as usize).clamp(1, n);
            if m == n {
                suite.grad_local_into(i, x, out);
            } else {
                let idx = sample(rng, n, m);
                local.grad_rows_into(x, idx.into_iter(), out);
            }
        }
    }
}

fn add_iso(out: &mut [f64], total_var: f64, d: usize, rng: &mut ChaCha8Rng) {
    if total_var == 0.0 {
        return;
    }
    let sd = (total_var / d as f64).sqrt();
    for o in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *o += sd * z;
    }
}

/// Checked single-node draw.
pub fn sample_gradient(
    spec: &NoiseSpec,
    suite: &ObjectiveSuite,
    i: usize,
    x: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    spec.validate(suite)?;
    let mut out = suite.grad_local(i, x)?;
    sample_gradient_into(spec, suite, i, x, rng, &mut out);
    Ok(out)
}

/// Plug-in estimate of the per-node variance `σ²` at `x*`: the largest over
/// nodes of the mean squared deviation across `draws` samples.
pub fn estimate_sigma2(spec: &NoiseSpec, suite: &ObjectiveSuite, draws: usize, seed: u64) -> Result<f64> {
    spec.validate(suite)?;
    if let Some(s) = spec.sigma() {
        return Ok(s * s);
    }
    let x = &suite.x_star;
    let mut worst: f64 = 0.0;
    let mut g = vec![0.0; suite.dim()];
    for i in 0..suite.node_count() {
        let exact = suite.grad_local(i, x)?;
        let mut acc = 0.0;
        for k in 0..draws {
            let mut rng = stream_rng(seed, u64::MAX, i as u64, k as u64);
            sample_gradient_into(spec, suite, i, x, &mut rng, &mut g);
            acc += dist2_sq(&g, &exact);
        }
        worst = worst.max(acc / draws as f64);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::objectives::{random_quadratic, synthetic_logistic, LogisticParams, QuadraticLocal};

    fn quad() -> ObjectiveSuite {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        random_quadratic(2, 3, 1.0, 3.0, &mut rng).unwrap()
    }

    #[test]
    fn exact_matches_gradient() {
        let s = quad();
        let x = [0.3, -0.2, 1.0];
        let g = sample_gradient(&NoiseSpec::Exact, &s, 1, &x, &mut stream_rng(1, 2, 3, 4)).unwrap();
        assert_eq!(g, s.grad_local(1, &x).unwrap());
    }

    #[test]
    fn minibatch_rejected_on_quadratic() {
        let s = quad();
        let err = sample_gradient(&NoiseSpec::Minibatch { b: 0.5 }, &s, 0, &[0.0; 3], &mut stream_rng(0, 0, 0, 0));
        assert!(matches!(err, Err(Error::MinibatchOnQuadratic)));
    }

    #[test]
    fn full_batch_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LogisticParams { nodes: 2, samples: 20, dim: 3, ..Default::default() };
        let s = synthetic_logistic(&p, &mut rng).unwrap();
        let x = [0.1, 0.2, -0.3];
        let g = sample_gradient(&NoiseSpec::Minibatch { b: 1.0 }, &s, 0, &x, &mut stream_rng(0, 0, 0, 0)).unwrap();
        assert_eq!(g, s.grad_local(0, &x).unwrap());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = quad();
        let spec = NoiseSpec::GaussianIso { sigma: 1.0 };
        let x = [0.0; 3];
        let a = sample_gradient(&spec, &s, 0, &x, &mut stream_rng(7, 0, 0, 5)).unwrap();
        let b = sample_gradient(&spec, &s, 0, &x, &mut stream_rng(7, 0, 0, 5)).unwrap();
        let c = sample_gradient(&spec, &s, 0, &x, &mut stream_rng(7, 0, 1, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn relative_variance_grows_with_distance() {
        let l = QuadraticLocal::new(Matrix::identity(1), vec![0.0], 0.0).unwrap();
        let s = ObjectiveSuite::quadratic(vec![l]).unwrap();
        let spec = NoiseSpec::Relative { sigma: 0.0, eta: 2.0 };
        let draws = 20_000;
        let mut acc = 0.0;
        for k in 0..draws {
            let g = sample_gradient(&spec, &s, 0, &[3.0], &mut stream_rng(0, 0, 0, k)).unwrap();
            acc += (g[0] - 3.0).powi(2);
        }
        // (η²/2)·9 = 18
        let var = acc / draws as f64;
        assert!((var - 18.0).abs() < 0.05 * 18.0, "{var}");
    }
}
