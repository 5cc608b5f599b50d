//! Centralized closed-form solutions and capacity diagnostics.
//!
//! These are the ground truth the decentralized runs are measured against.
//! Gram-matrix routines are cubic in the sample count and refuse inputs with
//! more than [`MAX_GRAM_SAMPLES`] samples.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Cholesky, Matrix};
use crate::model::AgentDataset;
use crate::rf::exact_gaussian_kernel;

pub const MAX_GRAM_SAMPLES: usize = 5000;

/// Relative size of the first diagonal jitter tried when a kernel system
/// fails to factorize; it grows tenfold per retry.
pub const JITTER_SCALE: f64 = 1e-12;
const MAX_JITTER_RETRIES: usize = 8;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("λ must be positive, got {lambda}")));
    }
    Ok(())
}

/// `θ* = (Φ̃ᵀΦ̃ + λI)⁻¹Φ̃ᵀỹ` where agent `i`'s rows of `Φ̃` and `ỹ` carry the
/// weight `1/√T_i`. Assembled as `Σ_i (1/T_i)Φ_iΦ_iᵀ + λI` so the stacked
/// matrix is never formed.
pub fn centralized_rf_solution(agents: &[AgentDataset], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let dim = agents
        .first()
        .ok_or_else(|| Error::invalid("need at least one agent"))?
        .feature_dim();
    let mut normal = Matrix::zeros(dim, dim);
    let mut rhs = alloc::vec![0.0; dim];
    for a in agents {
        if a.feature_dim() != dim {
            return Err(Error::mismatch("agent feature dimension", dim, a.feature_dim()));
        }
        let w = 1.0 / a.n_train() as f64;
        normal.add_scaled(w, &a.design.gram())?;
        axpy(w, &a.design.tr_mul_vec(&a.labels)?, &mut rhs);
    }
    normal.add_diagonal(lambda);
    Cholesky::new(&normal)?.solve(&rhs)
}

/// Gaussian Gram matrix of the rows of `points`.
pub fn gram_matrix(points: &Matrix, bandwidth: f64) -> Result<Matrix> {
    let t = points.rows();
    if t > MAX_GRAM_SAMPLES {
        return Err(Error::invalid(format!(
            "{t} samples exceed the Gram-matrix limit of {MAX_GRAM_SAMPLES}"
        )));
    }
    let mut k = Matrix::zeros(t, t);
    for i in 0..t {
        k[(i, i)] = 1.0;
        for j in 0..i {
            let v = exact_gaussian_kernel(points.row(i), points.row(j), bandwidth)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Kernel ridge regression coefficients over the pooled training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrSolution {
    pub alpha: Vec<f64>,
    pub points: Matrix,
    pub bandwidth: f64,
    /// Diagonal jitter that had to be added before the solve succeeded; zero
    /// when the system factorized as is.
    pub jitter: f64,
}

impl KrrSolution {
    pub fn is_jittered(&self) -> bool {
        self.jitter > 0.0
    }

    /// `f(x) = Σ_t α_t κ(x, x_t)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.points
            .row_iter()
            .zip(&self.alpha)
            .map(|(p, a)| Ok(a * exact_gaussian_kernel(p, x, self.bandwidth)?))
            .sum()
    }
}

/// Minimizer of `Σ_i (1/T_i)‖y_i − K_iᵀα‖² + λ αᵀKα`, where `K_i` holds the
/// kernel columns of agent `i`'s samples. Rows of `features` are grouped by
/// agent in the order given by `agent_sizes`.
///
/// First-order optimality reads `K(S K + λI)α = K S y` with
/// `S = diag(1/T_{i(t)})`; this solves the positive definite system
/// `(K + λ S⁻¹)α = y`, whose solution satisfies it for any PSD `K` and gives
/// the unique fitted values even when `K` is rank deficient.
pub fn centralized_krr_solution(
    features: &Matrix,
    labels: &[f64],
    agent_sizes: &[usize],
    lambda: f64,
    bandwidth: f64,
) -> Result<KrrSolution> {
    check_lambda(lambda)?;
    if labels.len() != features.rows() {
        return Err(Error::mismatch("labels", features.rows(), labels.len()));
    }
    let total: usize = agent_sizes.iter().sum();
    if total != features.rows() {
        return Err(Error::mismatch("agent sizes", features.rows(), total));
    }
    if agent_sizes.contains(&0) {
        return Err(Error::invalid("agent sizes must be positive"));
    }
    let mut system = gram_matrix(features, bandwidth)?;
    let mut t = 0;
    for &size in agent_sizes {
        for _ in 0..size {
            system[(t, t)] += lambda * size as f64;
            t += 1;
        }
    }
    let (factor, jitter) = factorize_with_jitter(&mut system)?;
    Ok(KrrSolution {
        alpha: factor.solve(labels)?,
        points: features.clone(),
        bandwidth,
        jitter,
    })
}

/// [`centralized_krr_solution`] over the agents' training shards.
pub fn krr_from_agents(agents: &[AgentDataset], lambda: f64, bandwidth: f64) -> Result<KrrSolution> {
    let d = agents.first().map_or(0, |a| a.features.cols());
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut sizes = Vec::with_capacity(agents.len());
    for a in agents {
        data.extend_from_slice(a.features.as_slice());
        labels.extend_from_slice(&a.labels);
        sizes.push(a.n_train());
    }
    let features = Matrix::from_vec(labels.len(), d, data)?;
    centralized_krr_solution(&features, &labels, &sizes, lambda, bandwidth)
}

fn factorize_with_jitter(system: &mut Matrix) -> Result<(Cholesky, f64)> {
    if let Ok(f) = Cholesky::new(system) {
        return Ok((f, 0.0));
    }
    let n = system.rows().max(1) as f64;
    let mut step = JITTER_SCALE * system.trace() / n;
    let mut total = 0.0;
    for _ in 0..MAX_JITTER_RETRIES {
        system.add_diagonal(step - total);
        total = step;
        if let Ok(f) = Cholesky::new(system) {
            return Ok((f, total));
        }
        step *= 10.0;
    }
    Err(Error::Numerical("kernel system stayed singular after jitter".into()))
}

/// Effective degrees of freedom `Tr(K(K + λT I)⁻¹)` with `T = K.rows()`.
pub fn effective_dof(gram: &Matrix, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !gram.is_square() {
        return Err(Error::mismatch("Gram matrix", gram.rows(), gram.cols()));
    }
    let t = gram.rows();
    if t > MAX_GRAM_SAMPLES {
        return Err(Error::invalid(format!("{t} samples exceed the Gram-matrix limit")));
    }
    if gram.max_asymmetry() > 1e-12 * gram.max_abs().max(1.0) {
        return Err(Error::invalid("Gram matrix is not symmetric"));
    }
    let mut shifted = gram.clone();
    shifted.add_diagonal(lambda * t as f64);
    let factor = Cholesky::new(&shifted)?;
    let mut trace = 0.0;
    for j in 0..t {
        let x = factor.solve(&gram.column(j))?;
        trace += x[j];
    }
    Ok(trace)
}

/// Smallest `L` with `L ≥ (1/λ)(1/ε² + 2/(3ε)) ln(16 d/δ)`; zero when the
/// logarithm is not positive.
pub fn required_feature_count(d_eff: f64, lambda: f64, epsilon: f64, delta: f64) -> Result<u64> {
    check_lambda(lambda)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("δ must lie in (0, 1), got {delta}")));
    }
    if !(d_eff > 0.0) || !d_eff.is_finite() {
        return Err(Error::invalid(format!("effective dimension must be positive, got {d_eff}")));
    }
    let log_term = libm::log(16.0 * d_eff / delta);
    if log_term <= 0.0 {
        return Ok(0);
    }
    let bound = (1.0 / lambda) * (1.0 / (epsilon * epsilon) + 2.0 / (3.0 * epsilon)) * log_term;
    Ok(libm::ceil(bound) as u64)
}

/// `‖A θ − b‖ / ‖b‖` for the normal equations of [`centralized_rf_solution`].
pub fn rf_normal_residual(agents: &[AgentDataset], lambda: f64, theta: &[f64]) -> Result<f64> {
    let dim = theta.len();
    let mut lhs: Vec<f64> = theta.iter().map(|v| lambda * v).collect();
    let mut rhs = alloc::vec![0.0; dim];
    for a in agents {
        let w = 1.0 / a.n_train() as f64;
        let pred = a.design.mul_vec(theta)?;
        axpy(w, &a.design.tr_mul_vec(&pred)?, &mut lhs);
        axpy(w, &a.design.tr_mul_vec(&a.labels)?, &mut rhs);
    }
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    let scale = libm::sqrt(dot(&rhs, &rhs));
    let num = libm::sqrt(dot(&diff, &diff));
    Ok(if scale > 0.0 { num / scale } else { num })
}
