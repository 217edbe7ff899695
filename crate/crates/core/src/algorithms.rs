//! D-SG, D-ASG and multistage D-MASG iterations, plus the replicate runner.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist2_sq;
use crate::netgraph::{assert_assumption3, MixingMatrix, LAMBDA_ZERO_TOL};
use crate::noise::{sample_gradient_into, stream_rng, NoiseSpec};
use crate::objectives::ObjectiveSuite;

/// Values above this are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dsg,
    Dasg,
    Dmasg,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dsg => "dsg",
            Method::Dasg => "dasg",
            Method::Dmasg => "dmasg",
        }
    }
}

/// Momentum `(1 − √(αμ))/(1 + √(αμ))`.
pub fn standard_beta(alpha: f64, mu: f64) -> f64 {
    let s = (alpha * mu).sqrt();
    (1.0 - s) / (1.0 + s)
}

/// Identifies the random stream of one replicate.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSource {
    pub master: u64,
    pub replicate: u64,
}

/// Current and previous stacked iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub x_curr: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub k: u64,
}

impl RunState {
    /// `x^(0) = x^(−1) = x0`.
    pub fn new(x0: Vec<f64>) -> Self {
        RunState { x_prev: x0.clone(), x_curr: x0, k: 0 }
    }
}

fn check_dims(state: &RunState, w: &MixingMatrix, suite: &ObjectiveSuite) -> Result<()> {
    if w.node_count() != suite.node_count() {
        return Err(Error::DimensionMismatch { expected: suite.node_count(), got: w.node_count() });
    }
    let expected = suite.node_count() * suite.dim();
    for v in [&state.x_curr, &state.x_prev] {
        if v.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: v.len() });
        }
    }
    Ok(())
}

/// `out ← 𝒲z − α∇̃F(z)` with noise drawn from iteration `k` streams.
fn mix_and_descend(
    z: &[f64],
    k: u64,
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    noise: &NoiseSpec,
    alpha: f64,
    src: &NoiseSource,
    out: &mut [f64],
) {
    let d = suite.dim();
    w.mix_into(z, d, out);
    let mut g = vec![0.0; d];
    for i in 0..suite.node_count() {
        let zi = &z[i * d..(i + 1) * d];
        if matches!(noise, NoiseSpec::Exact) {
            suite.grad_local_into(i, zi, &mut g);
        } else {
            let mut rng = stream_rng(src.master, src.replicate, i as u64, k);
            sample_gradient_into(noise, suite, i, zi, &mut rng, &mut g);
        }
        for (o, gv) in out[i * d..(i + 1) * d].iter_mut().zip(&g) {
            *o -= alpha * gv;
        }
    }
}

/// `x_i ← Σ_j W_ij x_j − α∇̃f_i(x_i)`.
pub fn dsg_step(
    state: &mut RunState,
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    noise: &NoiseSpec,
    alpha: f64,
    src: &NoiseSource,
) -> Result<()> {
    check_dims(state, w, suite)?;
    let mut next = vec![0.0; state.x_curr.len()];
    mix_and_descend(&state.x_curr, state.k, w, suite, noise, alpha, src, &mut next);
    state.x_prev = std::mem::replace(&mut state.x_curr, next);
    state.k += 1;
    Ok(())
}

/// `y = (1+β)x_k − βx_{k−1}`, then `x_{k+1} = 𝒲y − α∇̃F(y)`.
pub fn dasg_step(
    state: &mut RunState,
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    noise: &NoiseSpec,
    alpha: f64,
    beta: f64,
    src: &NoiseSource,
) -> Result<()> {
    check_dims(state, w, suite)?;
    let y: Vec<f64> = state.x_curr.iter().zip(&state.x_prev).map(|(c, p)| (1.0 + beta) * c - beta * p).collect();
    let mut next = vec![0.0; y.len()];
    mix_and_descend(&y, state.k, w, suite, noise, alpha, src, &mut next);
    state.x_prev = std::mem::replace(&mut state.x_curr, next);
    state.k += 1;
    Ok(())
}

/// One D-MASG stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage {
    pub len: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MasgSchedule {
    pub stages: Vec<Stage>,
}

impl MasgSchedule {
    /// `Σ k_t`.
    pub fn total_len(&self) -> usize {
        self.stages.iter().map(|s| s.len).sum()
    }

    /// Global iteration index at which each stage ends.
    pub fn boundaries(&self) -> Vec<usize> {
        self.stages
            .iter()
            .scan(0, |acc, s| {
                *acc += s.len;
                Some(*acc)
            })
            .collect()
    }
}

/// Scaled condition number `(κ + 1)/λ_N`.
pub fn kappa_tilde(mu: f64, l: f64, lambda_n: f64) -> f64 {
    (l / mu + 1.0) / lambda_n
}

/// `⌈(p−2) ln(6pκ̃) √κ̃⌉`.
pub fn corollary_k1(p: f64, kappa_tilde: f64) -> usize {
    ((p - 2.0) * (6.0 * p * kappa_tilde).ln() * kappa_tilde.sqrt()).ceil() as usize
}

/// Geometric schedule from the suite and network constants.
pub fn build_masg_schedule(
    k1: usize,
    p: f64,
    suite: &ObjectiveSuite,
    w: &MixingMatrix,
    num_stages: usize,
) -> Result<MasgSchedule> {
    if !assert_assumption3(w) {
        return Err(Error::Assumption3Violated { lambda_n: w.lambda_min });
    }
    masg_schedule_from_constants(k1, p, suite.mu, suite.lipschitz, w.lambda_min, num_stages)
}

/// Stage 1: `(k₁, λ_N/(L+μ))`; stage `t ≥ 2`: `(2^t⌈p√κ̃ ln 2⌉, λ_N/(2^{2t}(L+μ)))`.
pub fn masg_schedule_from_constants(
    k1: usize,
    p: f64,
    mu: f64,
    l: f64,
    lambda_n: f64,
    num_stages: usize,
) -> Result<MasgSchedule> {
    if lambda_n <= LAMBDA_ZERO_TOL {
        return Err(Error::Assumption3Violated { lambda_n });
    }
    if k1 == 0 || num_stages == 0 {
        return Err(Error::ParameterOutOfRange("k1 and the stage count must be positive".into()));
    }
    if p < 7.0 {
        warn!("D-MASG schedule with p = {p} < 7 is outside the analyzed range");
    }
    let kt = kappa_tilde(mu, l, lambda_n);
    let base = (p * kt.sqrt() * std::f64::consts::LN_2).ceil() as usize;
    let stages = (1..=num_stages)
        .map(|t| {
            let (len, alpha) = if t == 1 {
                (k1, lambda_n / (l + mu))
            } else {
                (base << t, lambda_n / ((1u64 << (2 * t)) as f64 * (l + mu)))
            };
            Stage { len, alpha, beta: standard_beta(alpha, mu) }
        })
        .collect();
    Ok(MasgSchedule { stages })
}

/// Iteration plan for one run.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Dsg { alpha: f64, iters: usize },
    Dasg { alpha: f64, beta: f64, iters: usize },
    Masg(MasgSchedule),
}

impl Plan {
    pub fn total_iters(&self) -> usize {
        match self {
            Plan::Dsg { iters, .. } | Plan::Dasg { iters, .. } => *iters,
            Plan::Masg(s) => s.total_len(),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Plan::Dsg { .. } => Method::Dsg,
            Plan::Dasg { .. } => Method::Dasg,
            Plan::Masg(_) => Method::Dmasg,
        }
    }

    /// `(α, β)` of the first stage.
    pub fn first_alpha_beta(&self) -> (f64, f64) {
        match self {
            Plan::Dsg { alpha, .. } => (*alpha, 0.0),
            Plan::Dasg { alpha, beta, .. } => (*alpha, *beta),
            Plan::Masg(s) => s.stages.first().map_or((0.0, 0.0), |st| (st.alpha, st.beta)),
        }
    }
}

/// Single-method run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub iters: usize,
    pub replicates: usize,
    pub record_every: usize,
}

impl RunConfig {
    /// Resolve the plan for D-SG / D-ASG, warning on stepsizes outside the
    /// analyzed range.
    pub fn plan(&self, suite: &ObjectiveSuite, w: &MixingMatrix) -> Result<Plan> {
        if !(self.alpha > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("alpha must be positive, got {}", self.alpha)));
        }
        let l = suite.lipschitz;
        match self.method {
            Method::Dsg => {
                let hi = (1.0 + w.lambda_min) / l;
                if self.alpha >= hi {
                    warn!("D-SG stepsize {} is at or above (1+λ_N)/L = {hi}; the iteration may diverge", self.alpha);
                }
                Ok(Plan::Dsg { alpha: self.alpha, iters: self.iters })
            }
            Method::Dasg => {
                let beta = self.beta.unwrap_or_else(|| standard_beta(self.alpha, suite.mu));
                if !(beta >= 0.0) {
                    return Err(Error::ParameterOutOfRange(format!("beta must be nonnegative, got {beta}")));
                }
                let hi = w.lambda_min / l;
                if self.alpha > hi {
                    warn!("D-ASG stepsize {} exceeds λ_N/L = {hi}; rate guarantees do not apply", self.alpha);
                }
                Ok(Plan::Dasg { alpha: self.alpha, beta, iters: self.iters })
            }
            Method::Dmasg => Err(Error::Config("dmasg needs a schedule".into())),
        }
    }
}

/// Run one replicate of `plan`, calling `observe` at `k = 0` and after
/// every step. D-MASG restarts momentum at each stage start. Stops early
/// and returns `false` once the iterate diverges.
pub fn simulate_replicate(
    plan: &Plan,
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    noise: &NoiseSpec,
    x0: &[f64],
    src: &NoiseSource,
    mut observe: impl FnMut(&RunState),
) -> Result<bool> {
    let mut state = RunState::new(x0.to_vec());
    check_dims(&state, w, suite)?;
    observe(&state);
    let diverged = |s: &RunState| s.x_curr.iter().any(|v| !(v.abs() <= 1e150));
    match plan {
        Plan::Dsg { alpha, iters } => {
            for _ in 0..*iters {
                dsg_step(&mut state, w, suite, noise, *alpha, src)?;
                if diverged(&state) {
                    return Ok(false);
                }
                observe(&state);
            }
        }
        Plan::Dasg { alpha, beta, iters } => {
            for _ in 0..*iters {
                dasg_step(&mut state, w, suite, noise, *alpha, *beta, src)?;
                if diverged(&state) {
                    return Ok(false);
                }
                observe(&state);
            }
        }
        Plan::Masg(schedule) => {
            for stage in &schedule.stages {
                state.x_prev.clone_from(&state.x_curr);
                for _ in 0..stage.len {
                    dasg_step(&mut state, w, suite, noise, stage.alpha, stage.beta, src)?;
                    if diverged(&state) {
                        return Ok(false);
                    }
                    observe(&state);
                }
            }
        }
    }
    Ok(true)
}

/// D-MASG on a single replicate; returns the last iterate and the
/// `(x^(t,−1), x^(t,0))` pair seen at the start of every stage.
pub fn masg_run(
    schedule: &MasgSchedule,
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    noise: &NoiseSpec,
    x0: &[f64],
    src: &NoiseSource,
) -> Result<(RunState, Vec<(Vec<f64>, Vec<f64>)>)> {
    let mut state = RunState::new(x0.to_vec());
    check_dims(&state, w, suite)?;
    let mut starts = Vec::with_capacity(schedule.stages.len());
    for stage in &schedule.stages {
        state.x_prev.clone_from(&state.x_curr);
        starts.push((state.x_prev.clone(), state.x_curr.clone()));
        for _ in 0..stage.len {
            dasg_step(&mut state, w, suite, noise, stage.alpha, stage.beta, src)?;
        }
    }
    Ok((state, starts))
}

/// Per-iteration error measures of one stacked iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `Σ_i ‖x_i − x*‖²`.
    pub dist2_opt: f64,
    /// `‖x − x^∞‖²`.
    pub dist2_fixed: Option<f64>,
    /// `‖x̄ − x*‖²`.
    pub avg_dist2_opt: f64,
    /// `Σ_i ‖x_i − x̄‖²`.
    pub consensus_err: f64,
}

pub fn node_average(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut avg = vec![0.0; d];
    for i in 0..n {
        for (a, v) in avg.iter_mut().zip(&x[i * d..(i + 1) * d]) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= n as f64);
    avg
}

pub fn metrics(x: &[f64], x_star: &[f64], x_inf: Option<&[f64]>, n: usize) -> Metrics {
    let d = x_star.len();
    let avg = node_average(x, n, d);
    let mut dist2_opt = 0.0;
    let mut consensus_err = 0.0;
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        dist2_opt += dist2_sq(xi, x_star);
        consensus_err += dist2_sq(xi, &avg);
    }
    Metrics {
        dist2_opt,
        dist2_fixed: x_inf.map(|xf| dist2_sq(x, xf)),
        avg_dist2_opt: dist2_sq(&avg, x_star),
        consensus_err,
    }
}

/// Replicate-averaged metrics at one recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub k: u64,
    pub dist2_opt: f64,
    pub dist2_opt_se: f64,
    pub dist2_fixed: Option<f64>,
    pub dist2_fixed_se: Option<f64>,
    pub avg_dist2_opt: f64,
    pub avg_dist2_opt_se: f64,
    pub consensus_err: f64,
    /// Mean `‖x_i − x*‖²` per node, when requested.
    pub per_node: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub points: Vec<TracePoint>,
    pub replicates: usize,
}

/// Replicate loop options.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub replicates: usize,
    pub record_every: usize,
    pub seed: u64,
    pub per_node: bool,
}

/// Recorded iterations: `0`, every multiple of `record_every`, and the last.
pub fn record_points(total: usize, record_every: usize) -> Vec<u64> {
    let stride = record_every.max(1);
    let mut ks: Vec<u64> = (0..=total).step_by(stride).map(|k| k as u64).collect();
    if *ks.last().unwrap() != total as u64 {
        ks.push(total as u64);
    }
    ks
}

struct ReplicateRecord {
    values: Vec<Metrics>,
    per_node: Vec<Vec<f64>>,
}

/// Run `opts.replicates` independent replicates and average the metrics.
///
/// `x_inf` is ignored for D-MASG since its fixed point changes per stage.
/// Diverged replicates contribute `+inf` from the divergence point on.
pub fn run(
    plan: &Plan,
    w: &MixingMatrix,
    suite: &ObjectiveSuite,
    noise: &NoiseSpec,
    x0: &[f64],
    x_inf: Option<&[f64]>,
    opts: &RunOptions,
) -> Result<Trace> {
    noise.validate(suite)?;
    if opts.replicates == 0 {
        return Err(Error::ParameterOutOfRange("replicates must be positive".into()));
    }
    let x_inf = if matches!(plan, Plan::Masg(_)) { None } else { x_inf };
    let n = suite.node_count();
    let d = suite.dim();
    let ks = record_points(plan.total_iters(), opts.record_every);

    let records: Vec<ReplicateRecord> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let src = NoiseSource { master: opts.seed, replicate: r };
            let mut values = Vec::with_capacity(ks.len());
            let mut per_node = Vec::new();
            let mut next = 0;
            simulate_replicate(plan, w, suite, noise, x0, &src, |s| {
                if next < ks.len() && s.k == ks[next] {
                    values.push(metrics(&s.x_curr, &suite.x_star, x_inf, n));
                    if opts.per_node {
                        per_node.push((0..n).map(|i| dist2_sq(&s.x_curr[i * d..(i + 1) * d], &suite.x_star)).collect());
                    }
                    next += 1;
                }
            })?;
            let inf = Metrics {
                dist2_opt: f64::INFINITY,
                dist2_fixed: x_inf.map(|_| f64::INFINITY),
                avg_dist2_opt: f64::INFINITY,
                consensus_err: f64::INFINITY,
            };
            values.resize(ks.len(), inf);
            if opts.per_node {
                per_node.resize(ks.len(), vec![f64::INFINITY; n]);
            }
            Ok(ReplicateRecord { values, per_node })
        })
        .collect::<Result<Vec<_>>>()?;

    let reps = records.len() as f64;
    let mean_se = |f: &dyn Fn(&ReplicateRecord) -> f64| -> (f64, f64) {
        let mean = records.iter().map(f).sum::<f64>() / reps;
        if records.len() < 2 || !mean.is_finite() {
            return (mean, 0.0);
        }
        let var = records.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (reps - 1.0);
        (mean, (var / reps).sqrt())
    };
    let points = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let (dist2_opt, dist2_opt_se) = mean_se(&|r| r.values[j].dist2_opt);
            let (avg_dist2_opt, avg_dist2_opt_se) = mean_se(&|r| r.values[j].avg_dist2_opt);
            let (consensus_err, _) = mean_se(&|r| r.values[j].consensus_err);
            let fixed = x_inf.map(|_| mean_se(&|r| r.values[j].dist2_fixed.unwrap()));
            let per_node = opts
                .per_node
                .then(|| (0..n).map(|i| records.iter().map(|r| r.per_node[j][i]).sum::<f64>() / reps).collect());
            TracePoint {
                k,
                dist2_opt,
                dist2_opt_se,
                dist2_fixed: fixed.map(|f| f.0),
                dist2_fixed_se: fixed.map(|f| f.1),
                avg_dist2_opt,
                avg_dist2_opt_se,
                consensus_err,
                per_node,
            }
        })
        .collect();
    Ok(Trace { points, replicates: opts.replicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::netgraph::{build_mixing, Topology, WeightRule};
    use crate::objectives::{random_quadratic, QuadraticLocal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (MixingMatrix, ObjectiveSuite) {
        let w = build_mixing(&Topology::Ring { n: 4 }, WeightRule::Metropolis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (w, random_quadratic(4, 2, 1.0, 3.0, &mut rng).unwrap())
    }

    #[test]
    fn schedule_example() {
        // κ = 1 and λ_N = 0.5 give κ̃ = 4
        let s = masg_schedule_from_constants(5, 7.0, 1.0, 1.0, 0.5, 3).unwrap();
        assert_eq!(s.stages[0].len, 5);
        assert_eq!(s.stages[0].alpha, 0.5 / 2.0);
        assert_eq!(s.stages[1].len, 40);
        assert_eq!(s.stages[2].len, 80);
        assert_eq!(s.stages[2].alpha, 0.5 / (64.0 * 2.0));
        for st in &s.stages {
            assert_eq!(st.beta, standard_beta(st.alpha, 1.0));
        }
        assert_eq!(s.total_len(), 125);
        assert_eq!(s.boundaries(), vec![5, 45, 125]);
    }

    #[test]
    fn schedule_requires_positive_lambda() {
        assert!(matches!(
            masg_schedule_from_constants(5, 7.0, 1.0, 1.0, 0.0, 2),
            Err(Error::Assumption3Violated { .. })
        ));
    }

    #[test]
    fn single_node_identity_is_sgd() {
        let l = QuadraticLocal::new(Matrix::identity(1).scale(2.0), vec![1.0], 0.0).unwrap();
        let suite = ObjectiveSuite::quadratic(vec![l]).unwrap();
        let w = build_mixing(&Topology::Disconnected { n: 1 }, WeightRule::Metropolis).unwrap();
        let mut s = RunState::new(vec![3.0]);
        dsg_step(&mut s, &w, &suite, &NoiseSpec::Exact, 0.1, &NoiseSource { master: 0, replicate: 0 }).unwrap();
        assert_eq!(s.x_curr, vec![3.0 - 0.1 * (6.0 - 1.0)]);
        assert_eq!(s.x_prev, vec![3.0]);
    }

    #[test]
    fn zero_momentum_matches_dsg_bitwise() {
        let (w, suite) = setup();
        let noise = NoiseSpec::GaussianIso { sigma: 0.7 };
        let src = NoiseSource { master: 5, replicate: 2 };
        let x0: Vec<f64> = (0..8).map(|v| (v as f64).sin()).collect();
        let mut a = RunState::new(x0.clone());
        let mut b = RunState::new(x0);
        for _ in 0..25 {
            dsg_step(&mut a, &w, &suite, &noise, 0.05, &src).unwrap();
            dasg_step(&mut b, &w, &suite, &noise, 0.05, 0.0, &src).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn masg_restarts_and_single_stage_equals_dasg() {
        let (w, suite) = setup();
        let sched = masg_schedule_from_constants(7, 7.0, suite.mu, suite.lipschitz, 0.3, 3).unwrap();
        let noise = NoiseSpec::GaussianIso { sigma: 0.2 };
        let src = NoiseSource { master: 1, replicate: 0 };
        let x0 = vec![0.0; 8];
        let (_, starts) = masg_run(&sched, &w, &suite, &noise, &x0, &src).unwrap();
        assert_eq!(starts.len(), 3);
        for (prev, curr) in &starts {
            assert_eq!(prev, curr);
        }
        let one = MasgSchedule { stages: vec![sched.stages[0]] };
        let (end, _) = masg_run(&one, &w, &suite, &noise, &x0, &src).unwrap();
        let mut s = RunState::new(x0);
        for _ in 0..7 {
            dasg_step(&mut s, &w, &suite, &noise, one.stages[0].alpha, one.stages[0].beta, &src).unwrap();
        }
        assert_eq!(end, s);
    }

    #[test]
    fn run_is_deterministic_and_records_points() {
        let (w, suite) = setup();
        let plan = Plan::Dasg { alpha: 0.05, beta: 0.5, iters: 23 };
        let opts = RunOptions { replicates: 4, record_every: 5, seed: 9, per_node: true };
        let noise = NoiseSpec::GaussianIso { sigma: 1.0 };
        let a = run(&plan, &w, &suite, &noise, &[0.0; 8], None, &opts).unwrap();
        let b = run(&plan, &w, &suite, &noise, &[0.0; 8], None, &opts).unwrap();
        assert_eq!(a, b);
        let ks: Vec<u64> = a.points.iter().map(|p| p.k).collect();
        assert_eq!(ks, vec![0, 5, 10, 15, 20, 23]);
        let p = &a.points[3];
        let s: f64 = p.per_node.as_ref().unwrap().iter().sum();
        assert!((s - p.dist2_opt).abs() <= 1e-12 * p.dist2_opt.max(1.0));
    }

    #[test]
    fn divergent_run_reports_infinity() {
        let (w, suite) = setup();
        let plan = Plan::Dsg { alpha: 5.0, iters: 2000 };
        let opts = RunOptions { replicates: 1, record_every: 1000, seed: 0, per_node: false };
        let t = run(&plan, &w, &suite, &NoiseSpec::Exact, &[1.0; 8], None, &opts).unwrap();
        assert_eq!(t.points.last().unwrap().dist2_opt, f64::INFINITY);
    }
}
