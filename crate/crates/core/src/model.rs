//! The local ridge objective in random-feature space.
//!
//! Agent `i` with `T_i` samples minimizes
//! `R̂_i(θ) = (1/T_i)‖y_i − Φ_iᵀθ‖² + (λ/N)‖θ‖²`, whose Hessian
//! `H_i = (2/T_i)Φ_iΦ_iᵀ + (2λ/N)I` is constant.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::RawDataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, symmetric_eigenvalues, Cholesky, Matrix};
use crate::rf::RandomFeatureMap;

/// One agent's normalized samples and their feature-space images.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    /// Row `t` is `φ_L(features[t])`, i.e. this is `Φ_iᵀ` (`T_i × D`).
    pub design: Matrix,
    pub test_features: Matrix,
    pub test_labels: Vec<f64>,
    pub test_design: Matrix,
}

impl AgentDataset {
    pub fn new(map: &RandomFeatureMap, train: RawDataset, test: RawDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("agent needs at least one training sample"));
        }
        if test.dim() != train.dim() && !test.is_empty() {
            return Err(Error::mismatch("test features", train.dim(), test.dim()));
        }
        let design = map.map_rows(&train.features)?;
        let test_design = if test.is_empty() {
            Matrix::zeros(0, map.feature_dim())
        } else {
            map.map_rows(&test.features)?
        };
        Ok(AgentDataset {
            features: train.features,
            labels: train.labels,
            design,
            test_features: test.features,
            test_labels: test.labels,
            test_design,
        })
    }

    /// Training-only agent.
    pub fn train_only(map: &RandomFeatureMap, train: RawDataset) -> Result<Self> {
        let d = train.dim();
        Self::new(map, train, RawDataset::new(Matrix::zeros(0, d), Vec::new())?)
    }

    pub fn n_train(&self) -> usize {
        self.labels.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.design.cols()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.feature_dim() {
            return Err(Error::mismatch("parameter vector", self.feature_dim(), theta.len()));
        }
        Ok(())
    }

    /// Residuals `Φ_iᵀθ − y_i` on the training shard.
    fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        self.design
            .row_iter()
            .zip(&self.labels)
            .map(|(phi, y)| dot(phi, theta) - y)
            .collect()
    }
}

fn check_regularization(lambda: f64, n_agents: usize) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("regularization λ must be positive"));
    }
    if n_agents == 0 {
        return Err(Error::invalid("number of agents must be positive"));
    }
    Ok(())
}

/// `R̂_i(θ)`.
pub fn local_cost(theta: &[f64], agent: &AgentDataset, lambda: f64, n_agents: usize) -> Result<f64> {
    agent.check_theta(theta)?;
    check_regularization(lambda, n_agents)?;
    let t = agent.n_train() as f64;
    let fit: f64 = agent.residuals(theta).iter().map(|r| r * r).sum();
    Ok(fit / t + lambda / n_agents as f64 * dot(theta, theta))
}

/// `∇R̂_i(θ) = (2/T_i)Φ_i(Φ_iᵀθ − y_i) + (2λ/N)θ`.
pub fn local_gradient(theta: &[f64], agent: &AgentDataset, lambda: f64, n_agents: usize) -> Result<Vec<f64>> {
    agent.check_theta(theta)?;
    check_regularization(lambda, n_agents)?;
    let t = agent.n_train() as f64;
    let mut grad: Vec<f64> = theta.iter().map(|v| 2.0 * lambda / n_agents as f64 * v).collect();
    for (phi, r) in agent.design.row_iter().zip(agent.residuals(theta)) {
        axpy(2.0 * r / t, phi, &mut grad);
    }
    Ok(grad)
}

/// `H_i = (2/T_i)Φ_iΦ_iᵀ + (2λ/N)I`.
pub fn local_hessian(agent: &AgentDataset, lambda: f64, n_agents: usize) -> Result<Matrix> {
    check_regularization(lambda, n_agents)?;
    let mut h = agent.design.gram();
    h.scale(2.0 / agent.n_train() as f64);
    h.add_diagonal(2.0 * lambda / n_agents as f64);
    Ok(h)
}

/// Smallest strong convexity constant `m` and largest gradient Lipschitz
/// constant `M` over the local costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityConstants {
    pub m: f64,
    pub big_m: f64,
}

/// Exact extreme Hessian eigenvalues over all agents.
pub fn convexity_constants(agents: &[AgentDataset], lambda: f64, n_agents: usize) -> Result<ConvexityConstants> {
    extreme_eigen(agents, |a| local_hessian(a, lambda, n_agents), |e| e)
}

/// Extreme squared singular values of `(1/T_i)Φ_iΦ_iᵀ + (2λ/N)I`. They
/// differ from the exact Hessian spectrum used by [`convexity_constants`]; reported for comparison only.
pub fn squared_singular_constants(agents: &[AgentDataset], lambda: f64, n_agents: usize) -> Result<ConvexityConstants> {
    extreme_eigen(
        agents,
        |a| {
            check_regularization(lambda, n_agents)?;
            let mut m = a.design.gram();
            m.scale(1.0 / a.n_train() as f64);
            m.add_diagonal(2.0 * lambda / n_agents as f64);
            Ok(m)
        },
        |e| e * e,
    )
}

fn extreme_eigen(
    agents: &[AgentDataset],
    build: impl Fn(&AgentDataset) -> Result<Matrix>,
    post: impl Fn(f64) -> f64,
) -> Result<ConvexityConstants> {
    if agents.is_empty() {
        return Err(Error::invalid("need at least one agent"));
    }
    let dim = agents[0].feature_dim();
    let mut m = f64::INFINITY;
    let mut big_m = f64::NEG_INFINITY;
    for a in agents {
        if a.feature_dim() != dim {
            return Err(Error::mismatch("agent feature dimension", dim, a.feature_dim()));
        }
        let ev = symmetric_eigenvalues(&build(a)?)?;
        m = m.min(post(ev[0]));
        big_m = big_m.max(post(ev[ev.len() - 1]));
    }
    Ok(ConvexityConstants { m, big_m })
}

/// The iteration-independent part of the local ADMM step:
/// `(H_i + 2ρ|𝒩_i|I) θ = (2/T_i)Φ_i y_i − γ + aggregate`.
#[derive(Debug, Clone)]
pub struct LocalSolveContext {
    system: Matrix,
    factor: Cholesky,
    rhs_base: Vec<f64>,
}

impl LocalSolveContext {
    pub fn new(agent: &AgentDataset, lambda: f64, n_agents: usize, rho: f64, degree: usize) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::invalid("penalty ρ must be non-negative"));
        }
        let mut system = local_hessian(agent, lambda, n_agents)?;
        system.add_diagonal(2.0 * rho * degree as f64);
        // λ > 0 makes the system positive definite; a failure here is a bug
        let factor = Cholesky::new(&system)
            .map_err(|e| Error::Numerical(alloc::format!("local system factorization: {e}")))?;
        let t = agent.n_train() as f64;
        let rhs_base = agent
            .design
            .tr_mul_vec(&agent.labels)?
            .into_iter()
            .map(|v| 2.0 * v / t)
            .collect();
        Ok(LocalSolveContext {
            system,
            factor,
            rhs_base,
        })
    }

    pub fn system_matrix(&self) -> &Matrix {
        &self.system
    }

    pub fn rhs_base(&self) -> &[f64] {
        &self.rhs_base
    }

    pub fn dim(&self) -> usize {
        self.rhs_base.len()
    }

    /// Minimizer of `R̂_i(θ) + ρ|𝒩_i|‖θ‖² + θᵀ(γ − aggregate)`, where the
    /// caller passes `aggregate = ρ Σ_n (θ̂_i + θ̂_n)`.
    pub fn solve(&self, dual: &[f64], aggregate: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if dual.len() != n {
            return Err(Error::mismatch("dual vector", n, dual.len()));
        }
        if aggregate.len() != n {
            return Err(Error::mismatch("neighbor aggregate", n, aggregate.len()));
        }
        let mut rhs = vec![0.0; n];
        for k in 0..n {
            rhs[k] = self.rhs_base[k] - dual[k] + aggregate[k];
        }
        self.factor.solve_in_place(&mut rhs)?;
        Ok(rhs)
    }
}
