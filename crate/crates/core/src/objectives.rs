//! Local objectives `f_i`, their gradients, and the suite-level constants.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2_sq, Matrix};
use crate::oracles::symmetric_eigenvalues;

/// `f(x) = ½xᵀQx − pᵀx + r`.
#[derive(Debug, Clone)]
pub struct QuadraticLocal {
    pub q: Matrix,
    pub p: Vec<f64>,
    pub r: f64,
}

impl QuadraticLocal {
    pub fn new(q: Matrix, p: Vec<f64>, r: f64) -> Result<Self> {
        if !q.is_square() || q.rows() != p.len() {
            return Err(Error::DimensionMismatch { expected: q.rows(), got: p.len() });
        }
        if q.asymmetry() > 1e-12 {
            return Err(Error::NonPsdInput);
        }
        Ok(QuadraticLocal { q, p, r })
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.q.matvec(x)) - dot(&self.p, x) + self.r
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(x.len()) {
            *o = dot(self.q.row(i), x) - self.p[i];
        }
    }
}

/// `f(x) = (1/n) Σ log(1 + exp(−y⟨a, x⟩)) + λ‖x‖²` over the rows `a` of `features`.
#[derive(Debug, Clone)]
pub struct LogisticLocal {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub lambda: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticLocal {
    pub fn new(features: Matrix, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::ParameterOutOfRange("logistic node needs at least one sample".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.rows(), got: labels.len() });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::ParameterOutOfRange("labels must be +1 or -1".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::ParameterOutOfRange(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(LogisticLocal { features, labels, lambda })
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.samples();
        let loss: f64 = (0..n).map(|s| softplus(-self.labels[s] * dot(self.features.row(s), x))).sum();
        loss / n as f64 + self.lambda * norm2_sq(x)
    }

    /// Gradient of the data term restricted to `rows`, plus the full regularizer.
    pub fn grad_rows_into(&self, x: &[f64], rows: impl ExactSizeIterator<Item = usize>, out: &mut [f64]) {
        let m = rows.len() as f64;
        out.fill(0.0);
        for s in rows {
            let a = self.features.row(s);
            let y = self.labels[s];
            let c = -y * sigmoid(-y * dot(a, x)) / m;
            axpy(c, a, out);
        }
        axpy(2.0 * self.lambda, x, out);
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        self.grad_rows_into(x, 0..self.samples(), out);
    }
}

#[derive(Debug, Clone)]
pub enum Locals {
    Quadratic(Vec<QuadraticLocal>),
    Logistic(Vec<LogisticLocal>),
}

/// `N` local objectives of one kind with their global constants.
#[derive(Debug, Clone)]
pub struct ObjectiveSuite {
    locals: Locals,
    dim: usize,
    pub mu: f64,
    pub lipschitz: f64,
    pub kappa: f64,
    /// Minimizer of `f = (1/N) Σ f_i`.
    pub x_star: Vec<f64>,
    pub f_i_star: Vec<f64>,
    /// `‖∇F(x*,…,x*)‖` for the stacked objective.
    pub grad_at_xstar_norm: f64,
}

const MINIMIZER_TOL: f64 = 1e-10;

impl ObjectiveSuite {
    pub fn quadratic(locals: Vec<QuadraticLocal>) -> Result<Self> {
        let dim = locals.first().ok_or(Error::EmptyGraph)?.p.len();
        if let Some(bad) = locals.iter().find(|l| l.p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.p.len() });
        }
        let mut mu = f64::INFINITY;
        let mut lip: f64 = 0.0;
        for l in &locals {
            let ev = symmetric_eigenvalues(&l.q)?;
            mu = mu.min(*ev.last().unwrap());
            lip = lip.max(ev[0]);
        }
        if !(mu > 0.0) {
            return Err(Error::NonPsdInput);
        }
        let mut qsum = Matrix::zeros(dim, dim);
        let mut psum = vec![0.0; dim];
        for l in &locals {
            qsum = qsum.add(&l.q);
            axpy(1.0, &l.p, &mut psum);
        }
        let x_star = qsum.solve(&psum)?;
        let f_i_star =
            locals.iter().map(|l| Ok(l.r - 0.5 * dot(&l.p, &l.q.solve(&l.p)?))).collect::<Result<Vec<_>>>()?;
        Self::finish(Locals::Quadratic(locals), dim, mu, lip, x_star, f_i_star)
    }

    pub fn logistic(locals: Vec<LogisticLocal>) -> Result<Self> {
        let first = locals.first().ok_or(Error::EmptyGraph)?;
        let dim = first.features.cols();
        let lambda = first.lambda;
        if locals.iter().any(|l| l.lambda != lambda) {
            return Err(Error::ParameterOutOfRange("all logistic nodes must share lambda".into()));
        }
        if let Some(bad) = locals.iter().find(|l| l.features.cols() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.features.cols() });
        }
        if !(lambda > 0.0) {
            return Err(Error::ParameterOutOfRange("logistic suite needs lambda > 0 for strong convexity".into()));
        }
        let mu = 2.0 * lambda;
        let mut curv: f64 = 0.0;
        for l in &locals {
            let gram = l.features.transpose().matmul(&l.features);
            let top = symmetric_eigenvalues(&gram)?[0];
            curv = curv.max(top / (4.0 * l.samples() as f64));
        }
        let lip = mu + curv;

        let n = locals.len() as f64;
        let x_star = accelerated_minimize(dim, mu, lip, |x, g| {
            g.fill(0.0);
            let mut gi = vec![0.0; dim];
            for l in &locals {
                l.grad_into(x, &mut gi);
                axpy(1.0 / n, &gi, g);
            }
        })?;
        let f_i_star = locals
            .iter()
            .map(|l| {
                let xi = accelerated_minimize(dim, mu, lip, |x, g| l.grad_into(x, g))?;
                Ok(l.value(&xi))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::finish(Locals::Logistic(locals), dim, mu, lip, x_star, f_i_star)
    }

    fn finish(locals: Locals, dim: usize, mu: f64, lip: f64, x_star: Vec<f64>, f_i_star: Vec<f64>) -> Result<Self> {
        let mut suite = ObjectiveSuite {
            locals,
            dim,
            mu,
            lipschitz: lip,
            kappa: lip / mu,
            x_star,
            f_i_star,
            grad_at_xstar_norm: 0.0,
        };
        let stacked: Vec<f64> = (0..suite.node_count()).flat_map(|_| suite.x_star.iter().copied()).collect();
        suite.grad_at_xstar_norm = norm2_sq(&suite.stacked_grad(&stacked)?).sqrt();
        Ok(suite)
    }

    /// Replace the strong-convexity constant used by schedules and bounds.
    pub fn with_mu_override(mut self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || mu > self.lipschitz {
            return Err(Error::ParameterOutOfRange(format!("mu override {mu} must lie in (0, L={}]", self.lipschitz)));
        }
        self.mu = mu;
        self.kappa = self.lipschitz / mu;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        match &self.locals {
            Locals::Quadratic(v) => v.len(),
            Locals::Logistic(v) => v.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn locals(&self) -> &Locals {
        &self.locals
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.locals, Locals::Quadratic(_))
    }

    pub fn quadratic_locals(&self) -> Option<&[QuadraticLocal]> {
        match &self.locals {
            Locals::Quadratic(v) => Some(v),
            Locals::Logistic(_) => None,
        }
    }

    pub fn logistic_locals(&self) -> Option<&[LogisticLocal]> {
        match &self.locals {
            Locals::Logistic(v) => Some(v),
            Locals::Quadratic(_) => None,
        }
    }

    /// `(μ, L)`.
    pub fn suite_constants(&self) -> (f64, f64) {
        (self.mu, self.lipschitz)
    }

    fn check_node(&self, i: usize, x: &[f64]) -> Result<()> {
        if i >= self.node_count() {
            return Err(Error::DimensionMismatch { expected: self.node_count(), got: i });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    pub fn value_local(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_node(i, x)?;
        Ok(match &self.locals {
            Locals::Quadratic(v) => v[i].value(x),
            Locals::Logistic(v) => v[i].value(x),
        })
    }

    pub fn grad_local(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_node(i, x)?;
        let mut out = vec![0.0; self.dim];
        self.grad_local_into(i, x, &mut out);
        Ok(out)
    }

    /// Unchecked variant used in the simulation inner loop.
    pub fn grad_local_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        match &self.locals {
            Locals::Quadratic(v) => v[i].grad_into(x, out),
            Locals::Logistic(v) => v[i].grad_into(x, out),
        }
    }

    /// `f(x) = (1/N) Σ f_i(x)`.
    pub fn global_value(&self, x: &[f64]) -> Result<f64> {
        let n = self.node_count();
        let mut s = 0.0;
        for i in 0..n {
            s += self.value_local(i, x)?;
        }
        Ok(s / n as f64)
    }

    /// `∇f(x) = (1/N) Σ ∇f_i(x)`.
    pub fn global_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.node_count();
        let mut g = vec![0.0; self.dim];
        for i in 0..n {
            axpy(1.0 / n as f64, &self.grad_local(i, x)?, &mut g);
        }
        Ok(g)
    }

    /// `F(x) = Σ f_i(x_i)` on a stacked vector.
    pub fn stacked_value(&self, x: &[f64]) -> Result<f64> {
        self.check_stacked(x)?;
        let d = self.dim;
        (0..self.node_count()).map(|i| self.value_local(i, &x[i * d..(i + 1) * d])).sum()
    }

    pub fn stacked_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_stacked(x)?;
        let mut out = vec![0.0; x.len()];
        let d = self.dim;
        for i in 0..self.node_count() {
            self.grad_local_into(i, &x[i * d..(i + 1) * d], &mut out[i * d..(i + 1) * d]);
        }
        Ok(out)
    }

    fn check_stacked(&self, x: &[f64]) -> Result<()> {
        let expected = self.node_count() * self.dim;
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(())
    }

    /// `C₁ = √(2L Σ(f_i(0) − f_i*)) · (1 + 2(L+μ)/μ)`.
    pub fn c1_constant(&self) -> f64 {
        let zero = vec![0.0; self.dim];
        let gap: f64 =
            (0..self.node_count()).map(|i| (self.value_local(i, &zero).unwrap() - self.f_i_star[i]).max(0.0)).sum();
        let (mu, l) = (self.mu, self.lipschitz);
        (2.0 * l * gap).sqrt() * (1.0 + 2.0 * (l + mu) / mu)
    }

    /// Block-diagonal `diag(Q_1, …, Q_N)`.
    pub fn stacked_hessian(&self) -> Result<Matrix> {
        let locals = self.quadratic_locals().ok_or(Error::NonQuadraticSuite)?;
        let d = self.dim;
        let n = locals.len();
        let mut m = Matrix::zeros(n * d, n * d);
        for (b, l) in locals.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    m[(b * d + i, b * d + j)] = l.q[(i, j)];
                }
            }
        }
        Ok(m)
    }

    /// Stacked `(p_1, …, p_N)`.
    pub fn stacked_linear(&self) -> Result<Vec<f64>> {
        let locals = self.quadratic_locals().ok_or(Error::NonQuadraticSuite)?;
        Ok(locals.iter().flat_map(|l| l.p.iter().copied()).collect())
    }
}

/// Constant-momentum accelerated gradient until `‖∇g‖ ≤ 1e-10`.
fn accelerated_minimize(dim: usize, mu: f64, lip: f64, grad: impl Fn(&[f64], &mut [f64])) -> Result<Vec<f64>> {
    const MAX_ITERS: usize = 1_000_000;
    let q = (mu / lip).sqrt();
    let beta = (1.0 - q) / (1.0 + q);
    let mut x = vec![0.0; dim];
    let mut x_prev = x.clone();
    let mut y = x.clone();
    let mut g = vec![0.0; dim];
    for _ in 0..MAX_ITERS {
        grad(&y, &mut g);
        if norm2_sq(&g).sqrt() <= MINIMIZER_TOL {
            return Ok(y);
        }
        std::mem::swap(&mut x_prev, &mut x);
        for k in 0..dim {
            x[k] = y[k] - g[k] / lip;
        }
        for k in 0..dim {
            y[k] = x[k] + beta * (x[k] - x_prev[k]);
        }
    }
    Err(Error::NoConvergence { what: "logistic minimizer", iters: MAX_ITERS })
}

fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Matrix {
    // Gram-Schmidt on a Gaussian matrix, columns are the basis
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in &cols {
                let proj = dot(&v, c);
                axpy(-proj, c, &mut v);
            }
        }
        let n = norm2_sq(&v).sqrt();
        if n > 1e-8 {
            cols.push(v.into_iter().map(|e| e / n).collect());
        }
    }
    Matrix::from_fn(d, d, |i, j| cols[j][i])
}

fn spd_from(u: &Matrix, eig: &[f64]) -> Matrix {
    let q = u.matmul(&Matrix::diag(eig)).matmul(&u.transpose());
    // exact symmetry
    Matrix::from_fn(q.rows(), q.cols(), |i, j| 0.5 * (q[(i, j)] + q[(j, i)]))
}

fn random_linear_terms(n: usize, d: usize, rng: &mut impl Rng) -> Vec<(Vec<f64>, f64)> {
    (0..n)
        .map(|_| {
            let p = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let r = rng.sample::<f64, _>(StandardNormal);
            (p, r)
        })
        .collect()
}

/// Random quadratic suite whose Hessian spectra lie in `[mu, l]`, with `mu`
/// and `l` both attained so the computed constants equal the requested ones.
pub fn random_quadratic(n: usize, d: usize, mu: f64, l: f64, rng: &mut impl Rng) -> Result<ObjectiveSuite> {
    check_generator(n, d, mu, l)?;
    let mut locals = Vec::with_capacity(n);
    let terms = random_linear_terms(n, d, rng);
    for (i, (p, r)) in terms.into_iter().enumerate() {
        let u = random_orthogonal(d, rng);
        let mut eig: Vec<f64> = (0..d).map(|_| rng.gen_range(mu..=l)).collect();
        if i == 0 {
            eig[0] = mu;
            if d > 1 {
                eig[d - 1] = l;
            }
        } else if d == 1 && i == n - 1 {
            eig[0] = l;
        }
        locals.push(QuadraticLocal::new(spd_from(&u, &eig), p, r)?);
    }
    ObjectiveSuite::quadratic(locals)
}

/// Random quadratic suite whose Hessians share one eigenbasis, with the
/// first basis direction carrying `mu` and the last carrying `l` on every
/// node. For `d = 1` all Hessians equal `mu`.
pub fn random_aligned_quadratic(n: usize, d: usize, mu: f64, l: f64, rng: &mut impl Rng) -> Result<ObjectiveSuite> {
    check_generator(n, d, mu, l)?;
    let u = random_orthogonal(d, rng);
    let terms = random_linear_terms(n, d, rng);
    let mut locals = Vec::with_capacity(n);
    for (p, r) in terms {
        let mut eig: Vec<f64> = (0..d).map(|_| rng.gen_range(mu..=l)).collect();
        eig[0] = mu;
        if d > 1 {
            eig[d - 1] = l;
        }
        locals.push(QuadraticLocal::new(spd_from(&u, &eig), p, r)?);
    }
    ObjectiveSuite::quadratic(locals)
}

fn check_generator(n: usize, d: usize, mu: f64, l: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if d == 0 {
        return Err(Error::ParameterOutOfRange("dimension must be positive".into()));
    }
    if !(mu > 0.0 && mu <= l && l.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    Ok(())
}

/// Synthetic logistic-regression data generator parameters.
#[derive(Debug, Clone, Copy)]
pub struct LogisticParams {
    pub nodes: usize,
    /// Total sample count, split as evenly as possible across nodes.
    pub samples: usize,
    pub dim: usize,
    /// Feature variance `σ_X²`.
    pub sigma_x2: f64,
    pub lambda: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { nodes: 10, samples: 1000, dim: 100, sigma_x2: 5.0, lambda: 0.05 }
    }
}

/// `x₀ ~ N(0, I)`, features `~ N(0, σ_X² I)`, labels `sign(⟨a, x₀⟩)`.
pub fn synthetic_logistic(params: &LogisticParams, rng: &mut impl Rng) -> Result<ObjectiveSuite> {
    let LogisticParams { nodes, samples, dim, sigma_x2, lambda } = *params;
    if nodes == 0 {
        return Err(Error::EmptyGraph);
    }
    if samples < nodes || dim == 0 || !(sigma_x2 >= 0.0) {
        return Err(Error::ParameterOutOfRange("need samples >= nodes, dim > 0, sigma_x2 >= 0".into()));
    }
    let truth: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let sd = sigma_x2.sqrt();
    let normal = StandardNormal;
    let mut locals = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let ni = samples / nodes + usize::from(i < samples % nodes);
        let features = Matrix::from_fn(ni, dim, |_, _| {
            let z: f64 = normal.sample(rng);
            sd * z
        });
        let labels = (0..ni).map(|s| if dot(features.row(s), &truth) >= 0.0 { 1.0 } else { -1.0 }).collect();
        locals.push(LogisticLocal::new(features, labels, lambda)?);
    }
    ObjectiveSuite::logistic(locals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64) -> QuadraticLocal {
        QuadraticLocal::new(Matrix::from_rows(&[vec![1.0]]), vec![a], 0.5 * a * a).unwrap()
    }

    #[test]
    fn quadratic_minimizers() {
        let q = Matrix::identity(2);
        let s = ObjectiveSuite::quadratic(vec![QuadraticLocal::new(q.clone(), vec![1.0, 2.0], 0.0).unwrap()]).unwrap();
        assert_eq!(s.x_star, vec![1.0, 2.0]);
        let s = ObjectiveSuite::quadratic(vec![
            QuadraticLocal::new(q.clone(), vec![0.0, 0.0], 0.0).unwrap(),
            QuadraticLocal::new(q, vec![2.0, 0.0], 0.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(s.x_star, vec![1.0, 0.0]);
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_quadratic(3, 3, 0.5, 4.0, &mut rng).unwrap();
        let l = &s.quadratic_locals().unwrap()[1];
        let xm = l.q.solve(&l.p).unwrap();
        assert!(norm2_sq(&s.grad_local(1, &xm).unwrap()).sqrt() < 1e-12);
        assert!((s.mu - 0.5).abs() < 1e-12);
        assert!((s.lipschitz - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identity_scaled_constants() {
        let c = 2.5;
        let l = QuadraticLocal::new(Matrix::identity(2).scale(c), vec![0.0, 1.0], 0.0).unwrap();
        let s = ObjectiveSuite::quadratic(vec![l.clone(), l]).unwrap();
        assert_eq!(s.suite_constants(), (c, c));
        assert_eq!(s.kappa, 1.0);
    }

    #[test]
    fn c1_examples() {
        let s = ObjectiveSuite::quadratic(vec![scalar(1.0), scalar(-1.0)]).unwrap();
        assert!((s.c1_constant() - 2f64.sqrt() * 5.0).abs() < 1e-12);
        let zero = QuadraticLocal::new(Matrix::from_rows(&[vec![1.0]]), vec![0.0], 0.0).unwrap();
        let s = ObjectiveSuite::quadratic(vec![zero]).unwrap();
        assert_eq!(s.c1_constant(), 0.0);
    }

    #[test]
    fn logistic_symmetric_data_has_zero_gradient_at_origin() {
        let features = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, -2.0]]);
        let l = LogisticLocal::new(features, vec![1.0, 1.0], 0.1).unwrap();
        let s = ObjectiveSuite::logistic(vec![l]).unwrap();
        assert!(norm2_sq(&s.grad_local(0, &[0.0, 0.0]).unwrap()).sqrt() < 1e-15);
    }

    #[test]
    fn logistic_zero_features_constants() {
        let l = LogisticLocal::new(Matrix::zeros(3, 2), vec![1.0, -1.0, 1.0], 0.05).unwrap();
        let s = ObjectiveSuite::logistic(vec![l]).unwrap();
        assert_eq!(s.suite_constants(), (0.1, 0.1));
    }

    #[test]
    fn synthetic_logistic_minimizer_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LogisticParams { nodes: 3, samples: 60, dim: 5, ..Default::default() };
        let s = synthetic_logistic(&p, &mut rng).unwrap();
        assert!(norm2_sq(&s.global_grad(&s.x_star).unwrap()).sqrt() <= 1e-10);
        assert!(s.c1_constant() > 0.0);
    }

    #[test]
    fn dimension_checks() {
        let s = ObjectiveSuite::quadratic(vec![scalar(1.0)]).unwrap();
        assert!(matches!(s.grad_local(0, &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(s.stacked_grad(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(s.grad_local(3, &[1.0]).is_err());
    }
}
