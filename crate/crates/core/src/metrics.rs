//! Per-round metrics and the run trace.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{distance, dot};
use crate::model::AgentDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// `(1/T) Σ_i Σ_t (y_{i,t} − θ_iᵀφ(x_{i,t}))²`: every agent is scored with its
/// own parameter on its own shard, and the sum is divided by the total number
/// of samples in the chosen split.
pub fn compute_mse<T: AsRef<[f64]>>(thetas: &[T], agents: &[AgentDataset], split: Split) -> Result<f64> {
    if thetas.len() != agents.len() {
        return Err(Error::mismatch("parameter count", agents.len(), thetas.len()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (theta, agent) in thetas.iter().zip(agents) {
        let theta = theta.as_ref();
        if theta.len() != agent.feature_dim() {
            return Err(Error::mismatch("parameter vector", agent.feature_dim(), theta.len()));
        }
        let (design, labels) = match split {
            Split::Train => (&agent.design, &agent.labels),
            Split::Test => (&agent.test_design, &agent.test_labels),
        };
        for (phi, y) in design.row_iter().zip(labels) {
            let r = y - dot(phi, theta);
            sum += r * r;
        }
        count += labels.len();
    }
    if count == 0 {
        return Err(Error::invalid("cannot evaluate MSE on an empty split"));
    }
    Ok(sum / count as f64)
}

/// `max_{i,j} ‖θ_i − θ_j‖₂`; zero for fewer than two agents.
pub fn consensus_residual<T: AsRef<[f64]>>(thetas: &[T]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in thetas.iter().enumerate() {
        for b in &thetas[i + 1..] {
            worst = worst.max(distance(a.as_ref(), b.as_ref()));
        }
    }
    worst
}

/// `max_i ‖θ_i − θ*‖₂`.
pub fn optimality_residual<T: AsRef<[f64]>>(thetas: &[T], theta_star: &[f64]) -> f64 {
    thetas
        .iter()
        .map(|t| distance(t.as_ref(), theta_star))
        .fold(0.0, f64::max)
}

/// `‖Θ − Θ*‖_F` with every row of `Θ*` equal to `θ*`.
pub fn stacked_distance<T: AsRef<[f64]>>(thetas: &[T], theta_star: &[f64]) -> f64 {
    libm::sqrt(
        thetas
            .iter()
            .map(|t| {
                let d = distance(t.as_ref(), theta_star);
                d * d
            })
            .sum(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub mse_train: f64,
    /// `None` when no agent holds test samples.
    pub mse_test: Option<f64>,
    pub consensus_residual: f64,
    /// `None` when the centralized solution was not computed.
    pub optimality_residual: Option<f64>,
    pub cumulative_transmissions: u64,
    pub per_agent_transmissions: Vec<u64>,
}

/// Rows start at iteration 0 (the initial state) and increase by one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row; iterations must strictly increase and transmissions
    /// must not decrease.
    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.iteration <= last.iteration {
                return Err(Error::invalid("trace iterations must strictly increase"));
            }
            if row.cumulative_transmissions < last.cumulative_transmissions {
                return Err(Error::invalid("cumulative transmissions must not decrease"));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First iteration whose training MSE is at or below `level`.
    pub fn first_iteration_below(&self, level: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.mse_train <= level)
            .map(|r| r.iteration)
    }
}
