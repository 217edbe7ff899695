//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::Method;
use crate::error::{Error, Result};
use crate::netgraph::{build_mixing, shift_mixing, MixingMatrix, Topology, WeightRule};
use crate::noise::NoiseSpec;
use crate::objectives::{
    random_aligned_quadratic, random_quadratic, synthetic_logistic, LogisticParams, ObjectiveSuite,
};

/// How the local objectives are generated. The node count always comes
/// from the topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// Random quadratics; node 0 attains both `μ` and `L`.
    RandomQuadratic { dim: usize, mu: f64, l: f64, seed: u64 },
    /// Random quadratics sharing one eigenbasis; every node attains `μ` and `L`.
    AlignedQuadratic { dim: usize, mu: f64, l: f64, seed: u64 },
    /// Synthetic regularized logistic regression.
    Logistic {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_logistic_dim")]
        dim: usize,
        #[serde(default = "default_sigma_x2")]
        sigma_x2: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
        seed: u64,
    },
}

fn default_samples() -> usize {
    1000
}
fn default_logistic_dim() -> usize {
    100
}
fn default_sigma_x2() -> f64 {
    5.0
}
fn default_lambda() -> f64 {
    0.05
}

impl ObjectiveSpec {
    pub fn build(&self, nodes: usize) -> Result<ObjectiveSuite> {
        match *self {
            ObjectiveSpec::RandomQuadratic { dim, mu, l, seed } => {
                random_quadratic(nodes, dim, mu, l, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            ObjectiveSpec::AlignedQuadratic { dim, mu, l, seed } => {
                random_aligned_quadratic(nodes, dim, mu, l, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            ObjectiveSpec::Logistic { samples, dim, sigma_x2, lambda, seed } => {
                let params = LogisticParams { nodes, samples, dim, sigma_x2, lambda };
                synthetic_logistic(&params, &mut ChaCha8Rng::seed_from_u64(seed))
            }
        }
    }
}

/// D-MASG schedule parameters. `k1 = None` uses `⌈(p−2) ln(6pκ̃) √κ̃⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasgSpec {
    #[serde(default)]
    pub k1: Option<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    pub stages: usize,
}

fn default_p() -> f64 {
    7.0
}

/// Initial iterate, identical on every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    #[default]
    Zeros,
    Constant {
        value: f64,
    },
    Vector {
        x: Vec<f64>,
    },
}

impl InitSpec {
    pub fn stacked(&self, n: usize, d: usize) -> Result<Vec<f64>> {
        let one = match self {
            InitSpec::Zeros => vec![0.0; d],
            InitSpec::Constant { value } => vec![*value; d],
            InitSpec::Vector { x } => {
                if x.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: x.len() });
                }
                x.clone()
            }
        };
        Ok((0..n).flat_map(|_| one.iter().copied()).collect())
    }
}

/// One experiment file. List-valued fields are sweep axes; the sweep is
/// their Cartesian product in the order topology, noise, method, alpha, beta.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    /// Strong-convexity constant used by schedules and bounds instead of the
    /// computed one.
    #[serde(default)]
    pub mu_override: Option<f64>,
    pub topology: Vec<Topology>,
    #[serde(default)]
    pub weights: WeightRule,
    /// Replace `W` by `(τI + W)/(τ + 1)`.
    #[serde(default)]
    pub shift_tau: Option<f64>,
    pub noise: Vec<NoiseSpec>,
    pub method: Vec<Method>,
    /// Stepsizes for D-SG / D-ASG; ignored by D-MASG.
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// Momentum values for D-ASG; `null` entries use `(1−√(αμ))/(1+√(αμ))`.
    #[serde(default = "default_beta")]
    pub beta: Vec<Option<f64>>,
    #[serde(default)]
    pub masg: Option<MasgSpec>,
    pub iters: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub init: InitSpec,
    /// Append bound columns to the result table.
    #[serde(default)]
    pub bounds: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_beta() -> Vec<Option<f64>> {
    vec![None]
}

fn default_record_every() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |axis: &str| Err(Error::Config(format!("sweep axis `{axis}` is empty")));
        if self.topology.is_empty() {
            return empty("topology");
        }
        if self.noise.is_empty() {
            return empty("noise");
        }
        if self.method.is_empty() {
            return empty("method");
        }
        if self.beta.is_empty() {
            return empty("beta");
        }
        let stepped = self.method.iter().any(|m| *m != Method::Dmasg);
        if stepped && self.alpha.is_empty() {
            return empty("alpha");
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("alpha must be positive and finite, got {a}")));
        }
        if self.method.contains(&Method::Dmasg) && self.masg.is_none() {
            return Err(Error::Config("method dmasg needs a `masg` block".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        if let Some(tau) = self.shift_tau {
            if !(tau > 0.0) {
                return Err(Error::NonpositiveTau(tau));
            }
        }
        Ok(())
    }

    /// Objective suite for `nodes` nodes, with the `μ` override applied.
    pub fn suite(&self, nodes: usize) -> Result<ObjectiveSuite> {
        let suite = self.objective.build(nodes)?;
        match self.mu_override {
            Some(mu) => suite.with_mu_override(mu),
            None => Ok(suite),
        }
    }

    pub fn mixing(&self, topology: &Topology) -> Result<MixingMatrix> {
        let w = build_mixing(topology, self.weights)?;
        match self.shift_tau {
            Some(tau) => shift_mixing(&w, tau),
            None => Ok(w),
        }
    }

    /// Sweep points in output order.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let mut points = Vec::new();
        for topology in &self.topology {
            for noise in &self.noise {
                for &method in &self.method {
                    let mut push = |alpha: Option<f64>, beta: Option<f64>| {
                        points.push(SweepPoint {
                            id: points.len(),
                            topology: topology.clone(),
                            noise: *noise,
                            method,
                            alpha,
                            beta,
                        })
                    };
                    match method {
                        Method::Dmasg => push(None, None),
                        Method::Dsg => self.alpha.iter().for_each(|&a| push(Some(a), None)),
                        Method::Dasg => {
                            for &a in &self.alpha {
                                for &b in &self.beta {
                                    push(Some(a), b);
                                }
                            }
                        }
                    }
                }
            }
        }
        points
    }
}

/// One cell of the Cartesian sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub id: usize,
    pub topology: Topology,
    pub noise: NoiseSpec,
    pub method: Method,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "objective": {"kind": "aligned_quadratic", "dim": 2, "mu": 1.0, "l": 4.0, "seed": 7},
        "topology": [{"kind": "ring", "n": 3}, {"kind": "complete", "n": 3}],
        "noise": [{"kind": "gaussian_iso", "sigma": 1.0}],
        "method": ["dsg", "dasg"],
        "alpha": [0.01, 0.02],
        "beta": [null, 0.5],
        "iters": 10,
        "replicates": 2,
        "seed": 1
    }"#;

    #[test]
    fn cartesian_sweep_order() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let pts = cfg.sweep_points();
        // per topology: 2 dsg + 2×2 dasg
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0].method, Method::Dsg);
        assert_eq!(pts[2].method, Method::Dasg);
        assert_eq!((pts[2].alpha, pts[2].beta), (Some(0.01), None));
        assert_eq!((pts[3].alpha, pts[3].beta), (Some(0.01), Some(0.5)));
        assert!(pts.iter().enumerate().all(|(i, p)| p.id == i));
    }

    #[test]
    fn rejects_empty_axis_and_missing_seed() {
        let bad = MINIMAL.replace(r#""alpha": [0.01, 0.02]"#, r#""alpha": []"#);
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let no_seed = MINIMAL.replace(r#","seed": 1"#, "").replace(r#""seed": 1"#, r#""x": 1"#);
        assert!(ExperimentConfig::from_json(&no_seed).is_err());
        let masg = MINIMAL.replace(r#"["dsg", "dasg"]"#, r#"["dmasg"]"#);
        assert!(matches!(ExperimentConfig::from_json(&masg), Err(Error::Config(_))));
    }

    #[test]
    fn init_vector_length_checked() {
        assert_eq!(InitSpec::Constant { value: 2.0 }.stacked(2, 2).unwrap(), vec![2.0; 4]);
        assert!(InitSpec::Vector { x: vec![1.0] }.stacked(2, 2).is_err());
    }
}
