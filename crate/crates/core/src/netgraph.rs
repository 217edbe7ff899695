//! Communication topologies and doubly-stochastic mixing matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::oracles::symmetric_eigenvalues;

const SYM_TOL: f64 = 1e-12;
const STOCH_TOL: f64 = 1e-12;

/// Undirected communication graph. Every node is implicitly its own neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Complete {
        n: usize,
    },
    Star {
        n: usize,
    },
    Ring {
        n: usize,
    },
    /// 4-neighbor lattice, nodes numbered row-major.
    Grid {
        rows: usize,
        cols: usize,
    },
    Disconnected {
        n: usize,
    },
    Custom {
        n: usize,
        edges: Vec<[usize; 2]>,
    },
}

impl Topology {
    pub fn node_count(&self) -> usize {
        match self {
            Topology::Complete { n }
            | Topology::Star { n }
            | Topology::Ring { n }
            | Topology::Disconnected { n }
            | Topology::Custom { n, .. } => *n,
            Topology::Grid { rows, cols } => rows * cols,
        }
    }

    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match self {
            Topology::Complete { n } => format!("complete{n}"),
            Topology::Star { n } => format!("star{n}"),
            Topology::Ring { n } => format!("ring{n}"),
            Topology::Grid { rows, cols } => format!("grid{rows}x{cols}"),
            Topology::Disconnected { n } => format!("disconnected{n}"),
            Topology::Custom { n, .. } => format!("custom{n}"),
        }
    }

    /// Sorted neighbor lists, excluding the node itself.
    pub fn neighbors(&self) -> Result<Vec<Vec<usize>>> {
        let n = self.node_count();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adj = vec![Vec::new(); n];
        let mut link = |i: usize, j: usize| {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        };
        match self {
            Topology::Complete { .. } => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        link(i, j);
                    }
                }
            }
            Topology::Star { .. } => {
                for j in 1..n {
                    link(0, j);
                }
            }
            Topology::Ring { .. } => {
                for i in 0..n {
                    link(i, (i + 1) % n);
                }
            }
            Topology::Grid { rows, cols } => {
                for r in 0..*rows {
                    for c in 0..*cols {
                        let i = r * cols + c;
                        if c + 1 < *cols {
                            link(i, i + 1);
                        }
                        if r + 1 < *rows {
                            link(i, i + cols);
                        }
                    }
                }
            }
            Topology::Disconnected { .. } => {}
            Topology::Custom { edges, .. } => {
                for &[i, j] in edges {
                    if i >= n || j >= n {
                        return Err(Error::InvalidTopology(format!("edge ({i},{j}) out of range for {n} nodes")));
                    }
                    link(i, j);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(adj)
    }
}

/// Rule for turning a graph into mixing weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `W_ij = 1/(1+max(deg_i,deg_j))` on edges, diagonal takes the remainder.
    #[default]
    Metropolis,
    /// `W_ij = 1/(deg+1)` on edges and the diagonal; regular graphs only.
    EqualNeighbor,
}

/// Symmetric doubly-stochastic gossip matrix with its spectrum.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: Matrix,
    /// Eigenvalues, non-increasing.
    pub spectrum: Vec<f64>,
    /// `max{|λ₂|, |λ_N|}`; zero for a single node.
    pub gamma: f64,
    /// Smallest eigenvalue `λ_N`.
    pub lambda_min: f64,
    /// `1 − γ`.
    pub spectral_gap: f64,
    // nonzero off-diagonal entries per row, for fast application
    sparse: Vec<Vec<(usize, f64)>>,
}

impl MixingMatrix {
    /// Validate a candidate mixing matrix and compute its spectrum.
    pub fn from_matrix(w: Matrix) -> Result<Self> {
        let n = w.rows();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if !w.is_square() {
            return Err(Error::InvalidMixing(format!("matrix is {}x{}", w.rows(), w.cols())));
        }
        if w.asymmetry() > SYM_TOL {
            return Err(Error::InvalidMixing(format!("asymmetry {:e}", w.asymmetry())));
        }
        for i in 0..n {
            let row: f64 = w.row(i).iter().sum();
            if (row - 1.0).abs() > STOCH_TOL {
                return Err(Error::InvalidMixing(format!("row {i} sums to {row}")));
            }
            if w.row(i).iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidMixing(format!("row {i} has a negative or non-finite weight")));
            }
            if w[(i, i)] <= 0.0 {
                return Err(Error::InvalidMixing(format!("diagonal entry {i} is not positive")));
            }
        }
        let spectrum = symmetric_eigenvalues(&w)?;
        if (spectrum[0] - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMixing(format!("largest eigenvalue {} is not 1", spectrum[0])));
        }
        let lambda_min = *spectrum.last().unwrap();
        if lambda_min <= -1.0 + 1e-12 {
            return Err(Error::InvalidMixing(format!(
                "smallest eigenvalue {lambda_min} is -1; apply shift_mixing with tau > 0"
            )));
        }
        let gamma = if n == 1 { 0.0 } else { spectrum[1].abs().max(lambda_min.abs()) };
        let sparse =
            (0..n).map(|i| (0..n).filter(|&j| j != i && w[(i, j)] != 0.0).map(|j| (j, w[(i, j)])).collect()).collect();
        Ok(MixingMatrix { w, spectrum, gamma, lambda_min, spectral_gap: 1.0 - gamma, sparse })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn node_count(&self) -> usize {
        self.w.rows()
    }

    /// `(W ⊗ I_d) x` for a stacked vector of `N` blocks of length `d`.
    pub fn mix(&self, x: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.mix_into(x, d, &mut out);
        out
    }

    pub fn mix_into(&self, x: &[f64], d: usize, out: &mut [f64]) {
        let n = self.node_count();
        assert_eq!(x.len(), n * d);
        assert_eq!(out.len(), n * d);
        for i in 0..n {
            let wii = self.w[(i, i)];
            let dst = &mut out[i * d..(i + 1) * d];
            for (o, v) in dst.iter_mut().zip(&x[i * d..(i + 1) * d]) {
                *o = wii * v;
            }
            for &(j, wij) in &self.sparse[i] {
                for (o, v) in dst.iter_mut().zip(&x[j * d..(j + 1) * d]) {
                    *o += wij * v;
                }
            }
        }
    }

    /// Dense `W ⊗ I_d`.
    pub fn kron_identity(&self, d: usize) -> Matrix {
        self.w.kron(&Matrix::identity(d))
    }
}

/// Build the mixing matrix of `topology` under `rule`.
pub fn build_mixing(topology: &Topology, rule: WeightRule) -> Result<MixingMatrix> {
    if let Topology::Grid { rows, cols } = topology {
        if rows * cols == 0 {
            return Err(Error::EmptyGraph);
        }
    }
    let adj = topology.neighbors()?;
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut w = Matrix::zeros(n, n);
    match rule {
        WeightRule::Metropolis => {
            for i in 0..n {
                for &j in &adj[i] {
                    w[(i, j)] = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
                }
            }
        }
        WeightRule::EqualNeighbor => {
            let (min, max) = (*deg.iter().min().unwrap(), *deg.iter().max().unwrap());
            if min != max {
                return Err(Error::NonRegularGraph { min, max });
            }
            let v = 1.0 / (min as f64 + 1.0);
            for i in 0..n {
                for &j in &adj[i] {
                    w[(i, j)] = v;
                }
            }
        }
    }
    for i in 0..n {
        let off: f64 = adj[i].iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_matrix(w)
}

/// Lazy version `W_τ = (τ/(τ+1)) I + (1/(τ+1)) W`.
///
/// Eigenvalues map to `(τ+λ)/(τ+1)`, so `λ_N(W_τ) > (τ−1)/(τ+1)`; `τ = 1`
/// only guarantees `λ_N ≥ 0`, which is strict whenever `λ_N(W) > −1`.
pub fn shift_mixing(w: &MixingMatrix, tau: f64) -> Result<MixingMatrix> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonpositiveTau(tau));
    }
    let n = w.node_count();
    let (a, b) = (tau / (tau + 1.0), 1.0 / (tau + 1.0));
    let mut m = w.matrix().scale(b);
    for i in 0..n {
        m[(i, i)] += a;
    }
    // rows of W sum to 1 only up to rounding; re-absorb it on the diagonal
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_matrix(m)
}

/// Eigenvalues within this distance of zero count as zero.
pub const LAMBDA_ZERO_TOL: f64 = 1e-12;

/// Whether every eigenvalue of `W` is strictly positive (beyond rounding).
pub fn assert_assumption3(w: &MixingMatrix) -> bool {
    w.lambda_min > LAMBDA_ZERO_TOL
}
