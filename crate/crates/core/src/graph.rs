//! Network topology, incidence matrices and the penalty feasibility bound.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix};
use crate::rng::{derive_seed, SeededRng};

/// Resampling cap for [`Graph::random_connected`].
pub const MAX_CONNECT_ATTEMPTS: u64 = 10_000;

/// Singular values at or below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Undirected, simple, connected graph over agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_agents: usize,
    /// Sorted `(i, n)` pairs with `i < n`.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Pairs may come in either orientation;
    /// self-loops, duplicates, out-of-range ids and disconnected graphs are
    /// rejected.
    pub fn from_edges(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = Self::from_edges_unchecked(n_agents, edges)?;
        if !g.is_connected() {
            return Err(Error::invalid("graph is not connected"));
        }
        Ok(g)
    }

    fn from_edges_unchecked(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::invalid("graph needs at least one agent"));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n_agents || b >= n_agents {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) references an agent outside 0..{n_agents}"
                )));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on agent {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::invalid(format!("duplicate edge ({a}, {b})")));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n_agents];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|l| l.sort_unstable());
        Ok(Graph {
            n_agents,
            edges,
            neighbors,
        })
    }

    /// Erdős–Rényi draw conditioned on connectivity: each pair `i < n`
    /// (lexicographic order) is kept with probability `p`; a disconnected draw
    /// is discarded and redrawn from the sub-seed `(seed, attempt)`.
    pub fn random_connected(n_agents: usize, p: f64, seed: u64) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::invalid("graph needs at least one agent"));
        }
        if !(p > 0.0 && p <= 1.0) {
            if n_agents == 1 && p == 0.0 {
                return Self::from_edges(1, &[]);
            }
            return Err(Error::invalid(format!(
                "edge probability must lie in (0, 1], got {p}"
            )));
        }
        for attempt in 0..MAX_CONNECT_ATTEMPTS {
            let mut rng = SeededRng::new(derive_seed(seed, attempt));
            let mut edges = Vec::new();
            for i in 0..n_agents {
                for j in i + 1..n_agents {
                    if rng.uniform() < p {
                        edges.push((i, j));
                    }
                }
            }
            let g = Self::from_edges_unchecked(n_agents, &edges)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::invalid(format!(
            "no connected graph with n = {n_agents}, p = {p} after {MAX_CONNECT_ATTEMPTS} attempts"
        )))
    }

    pub fn complete(n_agents: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n_agents)
            .flat_map(|i| (i + 1..n_agents).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n_agents, &edges)
    }

    pub fn path(n_agents: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n_agents).map(|i| (i - 1, i)).collect();
        Self::from_edges(n_agents, &edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbor ids of `agent`.
    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.neighbors[agent].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors
            .get(a)
            .is_some_and(|l| l.binary_search(&b).is_ok())
    }

    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n_agents, self.n_agents);
        for &(i, n) in &self.edges {
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
        }
        a
    }

    /// Degree matrix minus adjacency.
    pub fn laplacian(&self) -> Matrix {
        let mut l = self.adjacency();
        l.scale(-1.0);
        for i in 0..self.n_agents {
            l[(i, i)] = self.degree(i) as f64;
        }
        l
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_agents];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n_agents
    }

    /// Unsigned and signed edge-node incidence matrices `(S₊, S₋)`, one row per
    /// edge in sorted order. For edge `(i, n)` with `i < n`:
    /// `S₋[e,i] = +1, S₋[e,n] = −1` and `S₊[e,i] = S₊[e,n] = +1`.
    pub fn incidence_matrices(&self) -> Result<(Matrix, Matrix)> {
        if self.edges.is_empty() {
            return Err(Error::invalid("incidence matrices need at least one edge"));
        }
        let e = self.edges.len();
        let mut plus = Matrix::zeros(e, self.n_agents);
        let mut minus = Matrix::zeros(e, self.n_agents);
        for (row, &(i, n)) in self.edges.iter().enumerate() {
            plus[(row, i)] = 1.0;
            plus[(row, n)] = 1.0;
            minus[(row, i)] = 1.0;
            minus[(row, n)] = -1.0;
        }
        Ok((plus, minus))
    }

    /// Metropolis–Hastings combination weights:
    /// `w_in = 1/(1 + max(deg_i, deg_n))` on edges, self weight `1 − Σ_n w_in`.
    pub fn metropolis_weights(&self) -> Matrix {
        let n = self.n_agents;
        let mut w = Matrix::zeros(n, n);
        for &(i, j) in &self.edges {
            let v = 1.0 / (1.0 + self.degree(i).max(self.degree(j)) as f64);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        for i in 0..n {
            let off: f64 = self.neighbors[i].iter().map(|&j| w[(i, j)]).sum();
            w[(i, i)] = 1.0 - off;
        }
        w
    }
}

/// Extreme singular values of the incidence matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstants {
    /// Largest singular value of `S₊`.
    pub sigma_max_unsigned: f64,
    /// Smallest non-zero singular value of `S₋`.
    pub sigma_min_signed_nonzero: f64,
}

impl SpectralConstants {
    /// Singular values are taken directly from the incidence matrices, one per
    /// node, so the zero mode of `S₋` is resolved to rounding level.
    pub fn of(g: &Graph) -> Result<Self> {
        let (plus, minus) = g.incidence_matrices()?;
        let plus_sv = singular_values(&plus)?;
        let minus_sv = singular_values(&minus)?;
        let sigma_max_unsigned = plus_sv.last().copied().unwrap_or(0.0);
        let top = minus_sv.last().copied().unwrap_or(0.0);
        let sigma_min_signed_nonzero = minus_sv
            .iter()
            .copied()
            .find(|&s| s > RANK_TOLERANCE * top)
            .ok_or_else(|| Error::Numerical("signed incidence matrix has no non-zero singular value".into()))?;
        Ok(SpectralConstants {
            sigma_max_unsigned,
            sigma_min_signed_nonzero,
        })
    }
}

/// The free constants `(η₁, η₂, η₃, ν)` of the penalty bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConstants {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub nu: f64,
}

impl Default for PenaltyConstants {
    fn default() -> Self {
        PenaltyConstants {
            eta1: 1.0,
            eta2: 1.0,
            eta3: 0.1,
            nu: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoBound {
    /// Any `ρ` in `(0, bound)` is certified.
    Bound(f64),
    /// The curvature term is non-positive: no `ρ` is certified for these constants.
    Infeasible,
}

impl RhoBound {
    pub fn value(self) -> Option<f64> {
        match self {
            RhoBound::Bound(v) => Some(v),
            RhoBound::Infeasible => None,
        }
    }
}

/// Upper limit on the ADMM penalty for linear convergence under censoring:
///
/// ```text
/// min{ 4m/η₁,
///      (ν−1)σ̃²_min(S₋) / (ν η₃ σ̃²_max(S₊)),
///      (η₁/4 + η₂σ̃²_max(S₊)/8)⁻¹ · (m − η₃ν M²/σ̃²_min(S₋)) }
/// ```
///
/// `m` is the smallest strong convexity constant and `M` the largest gradient
/// Lipschitz constant over the local costs.
pub fn rho_upper_bound(
    m: f64,
    big_m: f64,
    spectra: &SpectralConstants,
    consts: &PenaltyConstants,
) -> Result<RhoBound> {
    let PenaltyConstants {
        eta1,
        eta2,
        eta3,
        nu,
    } = *consts;
    if !(nu > 1.0) {
        return Err(Error::invalid(format!("ν must exceed 1, got {nu}")));
    }
    for (name, v) in [("η₁", eta1), ("η₂", eta2), ("η₃", eta3), ("m", m), ("M", big_m)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if m > big_m {
        return Err(Error::invalid(format!("m = {m} exceeds M = {big_m}")));
    }
    let smax2 = spectra.sigma_max_unsigned * spectra.sigma_max_unsigned;
    let smin2 = spectra.sigma_min_signed_nonzero * spectra.sigma_min_signed_nonzero;
    if !(smax2 > 0.0 && smin2 > 0.0) {
        return Err(Error::invalid("spectral constants must be positive"));
    }

    let curvature = m - eta3 * nu * big_m * big_m / smin2;
    // within rounding of zero counts as the boundary, which is not certified
    if curvature <= 16.0 * f64::EPSILON * m {
        return Ok(RhoBound::Infeasible);
    }
    let first = 4.0 * m / eta1;
    let second = (nu - 1.0) * smin2 / (nu * eta3 * smax2);
    let third = curvature / (eta1 / 4.0 + eta2 * smax2 / 8.0);
    Ok(RhoBound::Bound(first.min(second).min(third)))
}
