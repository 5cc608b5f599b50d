//! Synchronous round engine for consensus ADMM, censored ADMM and diffusion.
//!
//! Every round is split into barrier-separated phases: all agents compute
//! their primal update from the previous round's values, then broadcasts are
//! decided and delivered, then duals are updated from the delivered values.
//! Neighbor sums always run in ascending agent id, so results do not depend
//! on how a caller schedules the per-agent work.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{axpy, distance, Matrix};
use crate::metrics::{compute_mse, consensus_residual, optimality_residual, RunTrace, Split, TraceRow};
use crate::model::{local_gradient, AgentDataset, LocalSolveContext};

/// A run aborts once the training MSE exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Local variables held by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub theta: Vec<f64>,
    pub dual: Vec<f64>,
    /// Last value this agent broadcast.
    pub last_broadcast: Vec<f64>,
    /// Last value received from each neighbor, keyed by neighbor id.
    pub neighbor_cache: BTreeMap<usize, Vec<f64>>,
    pub transmissions: u64,
}

impl AgentState {
    /// All-zero state with an empty-valued cache entry per neighbor.
    pub fn initial(graph: &Graph, agent: usize, dim: usize) -> Self {
        AgentState {
            theta: vec![0.0; dim],
            dual: vec![0.0; dim],
            last_broadcast: vec![0.0; dim],
            neighbor_cache: graph
                .neighbors(agent)
                .iter()
                .map(|&n| (n, vec![0.0; dim]))
                .collect(),
            transmissions: 0,
        }
    }
}

pub fn initial_states(graph: &Graph, dim: usize) -> Vec<AgentState> {
    (0..graph.n_agents())
        .map(|i| AgentState::initial(graph, i, dim))
        .collect()
}

/// Censoring thresholds `h(k) = v·μᵏ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoringSchedule {
    v: f64,
    mu: f64,
}

impl CensoringSchedule {
    pub fn new(v: f64, mu: f64) -> Result<Self> {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("censoring scale v must be non-negative, got {v}")));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::invalid(format!("censoring decay μ must lie in (0, 1), got {mu}")));
        }
        Ok(CensoringSchedule { v, mu })
    }

    /// `h ≡ 0`: every update is transmitted.
    pub fn never() -> Self {
        CensoringSchedule { v: 0.0, mu: 0.5 }
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn threshold(&self, k: usize) -> f64 {
        self.v * libm::pow(self.mu, k as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// Consensus ADMM; every agent broadcasts every round.
    Dkla,
    /// Consensus ADMM with censored broadcasts.
    Coke(CensoringSchedule),
    /// Combine-then-adapt diffusion with Metropolis weights.
    Cta { step: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Dkla => "dkla",
            Algorithm::Coke(_) => "coke",
            Algorithm::Cta { .. } => "cta",
        }
    }
}

/// Builds one solve context per agent for penalty `rho`.
pub fn build_contexts(
    graph: &Graph,
    agents: &[AgentDataset],
    lambda: f64,
    rho: f64,
) -> Result<Vec<LocalSolveContext>> {
    if agents.len() != graph.n_agents() {
        return Err(Error::mismatch("agent datasets", graph.n_agents(), agents.len()));
    }
    agents
        .iter()
        .enumerate()
        .map(|(i, a)| LocalSolveContext::new(a, lambda, agents.len(), rho, graph.degree(i)))
        .collect()
}

fn check_round_inputs(states: &[AgentState], graph: &Graph, n_other: usize, what: &'static str) -> Result<()> {
    if states.len() != graph.n_agents() {
        return Err(Error::mismatch("agent states", graph.n_agents(), states.len()));
    }
    if n_other != graph.n_agents() {
        return Err(Error::mismatch(what, graph.n_agents(), n_other));
    }
    Ok(())
}

/// One consensus ADMM round. Every agent solves its local subproblem against
/// the previous round's values, broadcasts, then updates its dual with the
/// fresh values. Returns the number of transmissions (always `N`).
pub fn dkla_round(
    states: &mut [AgentState],
    graph: &Graph,
    contexts: &[LocalSolveContext],
    rho: f64,
) -> Result<u64> {
    admm_round(states, graph, contexts, rho, None)
}

/// One censored ADMM round at iteration `k ≥ 1`. An agent transmits only when
/// `‖θ̂_i^{k−1} − θ_i^k‖ − h(k) ≥ 0`; otherwise its neighbors keep the stale
/// value. Returns the number of agents that transmitted.
pub fn coke_round(
    states: &mut [AgentState],
    graph: &Graph,
    contexts: &[LocalSolveContext],
    rho: f64,
    schedule: &CensoringSchedule,
    k: usize,
) -> Result<u64> {
    admm_round(states, graph, contexts, rho, Some(schedule.threshold(k)))
}

fn admm_round(
    states: &mut [AgentState],
    graph: &Graph,
    contexts: &[LocalSolveContext],
    rho: f64,
    threshold: Option<f64>,
) -> Result<u64> {
    check_round_inputs(states, graph, contexts.len(), "solve contexts")?;
    let dim = contexts.first().map_or(0, LocalSolveContext::dim);

    // primal phase: reads only round k-1 values
    let mut primal = Vec::with_capacity(states.len());
    for (i, (state, ctx)) in states.iter().zip(contexts).enumerate() {
        let mut aggregate = vec![0.0; dim];
        for &n in graph.neighbors(i) {
            let theirs = &state.neighbor_cache[&n];
            for k in 0..dim {
                aggregate[k] += state.last_broadcast[k] + theirs[k];
            }
        }
        aggregate.iter_mut().for_each(|v| *v *= rho);
        primal.push(ctx.solve(&state.dual, &aggregate)?);
    }

    // censor and broadcast phase
    let mut sent = vec![false; states.len()];
    let mut count = 0;
    for ((state, theta), sent) in states.iter_mut().zip(primal).zip(sent.iter_mut()) {
        *sent = match threshold {
            None => true,
            Some(h) => distance(&state.last_broadcast, &theta) - h >= 0.0,
        };
        if *sent {
            state.last_broadcast.clone_from(&theta);
            state.transmissions += 1;
            count += 1;
        }
        state.theta = theta;
    }
    deliver(states, graph, &sent);

    // dual phase: uses the values delivered this round
    for (i, state) in states.iter_mut().enumerate() {
        let mut diff = vec![0.0; dim];
        for &n in graph.neighbors(i) {
            let theirs = &state.neighbor_cache[&n];
            for k in 0..dim {
                diff[k] += state.last_broadcast[k] - theirs[k];
            }
        }
        axpy(rho, &diff, &mut state.dual);
    }
    Ok(count)
}

fn deliver(states: &mut [AgentState], graph: &Graph, sent: &[bool]) {
    let outgoing: Vec<Option<Vec<f64>>> = states
        .iter()
        .zip(sent)
        .map(|(s, &sent)| sent.then(|| s.last_broadcast.clone()))
        .collect();
    for (i, state) in states.iter_mut().enumerate() {
        for &n in graph.neighbors(i) {
            if let Some(v) = &outgoing[n] {
                state.neighbor_cache.insert(n, v.clone());
            }
        }
    }
}

/// Row-stochastic combination weights supported on the graph (plus self loops).
#[derive(Debug, Clone, PartialEq)]
pub struct CtaWeights {
    weights: Matrix,
}

impl CtaWeights {
    pub fn metropolis(graph: &Graph) -> Self {
        CtaWeights {
            weights: graph.metropolis_weights(),
        }
    }

    /// Validates custom weights: rows sum to one and only neighbors or the
    /// agent itself carry weight.
    pub fn new(graph: &Graph, weights: Matrix) -> Result<Self> {
        let n = graph.n_agents();
        if weights.rows() != n || weights.cols() != n {
            return Err(Error::mismatch("combination weights", n, weights.rows()));
        }
        for i in 0..n {
            let s: f64 = weights.row(i).iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("weight row {i} sums to {s}, not 1")));
            }
            for j in 0..n {
                if i != j && weights[(i, j)] != 0.0 && !graph.has_edge(i, j) {
                    return Err(Error::invalid(format!("weight ({i}, {j}) is not on an edge")));
                }
            }
        }
        Ok(CtaWeights { weights })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.weights
    }
}

/// One combine-then-adapt round: `ψ_i = Σ_{n∈𝒩_i∪{i}} w_in θ_n`, then
/// `θ_i = ψ_i − η∇R̂_i(ψ_i)`. Every agent broadcasts (`N` transmissions).
pub fn cta_round(
    states: &mut [AgentState],
    graph: &Graph,
    agents: &[AgentDataset],
    weights: &CtaWeights,
    lambda: f64,
    step: f64,
) -> Result<u64> {
    check_round_inputs(states, graph, agents.len(), "agent datasets")?;
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("CTA step must lie in (0, 1], got {step}")));
    }
    let n_agents = agents.len();
    let mut updated = Vec::with_capacity(n_agents);
    for (i, state) in states.iter().enumerate() {
        let mut psi = vec![0.0; state.theta.len()];
        // ascending id, with the agent's own value at its own position
        let mut members: Vec<usize> = graph.neighbors(i).to_vec();
        let pos = members.partition_point(|&n| n < i);
        members.insert(pos, i);
        for n in members {
            let value = if n == i { &state.theta } else { &state.neighbor_cache[&n] };
            axpy(weights.matrix()[(i, n)], value, &mut psi);
        }
        let grad = local_gradient(&psi, &agents[i], lambda, n_agents)?;
        axpy(-step, &grad, &mut psi);
        updated.push(psi);
    }
    for (state, theta) in states.iter_mut().zip(updated) {
        state.last_broadcast.clone_from(&theta);
        state.theta = theta;
        state.transmissions += 1;
    }
    deliver(states, graph, &vec![true; n_agents]);
    Ok(n_agents as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub rho: f64,
    pub max_iterations: usize,
    /// Early stop once the consensus residual is at or below this value
    /// (and the optimality residual below `optimality_tol`, when set).
    pub consensus_tol: Option<f64>,
    pub optimality_tol: Option<f64>,
}

impl RunConfig {
    pub fn new(lambda: f64, rho: f64, max_iterations: usize) -> Self {
        RunConfig {
            lambda,
            rho,
            max_iterations,
            consensus_tol: None,
            optimality_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Ran the full iteration budget.
    Completed,
    /// Stopped early on the configured tolerances.
    Converged,
    /// Training MSE blew up; the trace ends at the offending round.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub status: RunStatus,
    pub states: Vec<AgentState>,
}

/// Runs `algorithm` from the all-zero initial state.
pub fn run(
    config: &RunConfig,
    graph: &Graph,
    agents: &[AgentDataset],
    algorithm: Algorithm,
    theta_star: Option<&[f64]>,
) -> Result<RunOutcome> {
    run_observed(config, graph, agents, algorithm, theta_star, |_, _| {})
}

/// Like [`run`], calling `observer(k, states)` after the initial state and
/// after every round.
pub fn run_observed(
    config: &RunConfig,
    graph: &Graph,
    agents: &[AgentDataset],
    algorithm: Algorithm,
    theta_star: Option<&[f64]>,
    mut observer: impl FnMut(usize, &[AgentState]),
) -> Result<RunOutcome> {
    if agents.len() != graph.n_agents() {
        return Err(Error::mismatch("agent datasets", graph.n_agents(), agents.len()));
    }
    let dim = agents[0].feature_dim();
    if let Some(a) = agents.iter().find(|a| a.feature_dim() != dim) {
        return Err(Error::mismatch("agent feature dimension", dim, a.feature_dim()));
    }
    if let Some(ts) = theta_star {
        if ts.len() != dim {
            return Err(Error::mismatch("centralized solution", dim, ts.len()));
        }
    }
    let contexts = match algorithm {
        Algorithm::Dkla | Algorithm::Coke(_) => {
            if !(config.rho > 0.0) {
                return Err(Error::invalid("ADMM penalty ρ must be positive"));
            }
            build_contexts(graph, agents, config.lambda, config.rho)?
        }
        Algorithm::Cta { .. } => Vec::new(),
    };
    let weights = CtaWeights::metropolis(graph);
    let has_test = agents.iter().any(|a| a.n_test() > 0);

    let mut states = initial_states(graph, dim);
    let mut trace = RunTrace::new();
    let mut cumulative = 0u64;
    let snapshot = |k: usize, states: &[AgentState], cumulative: u64| -> Result<TraceRow> {
        let thetas: Vec<&[f64]> = states.iter().map(|s| s.theta.as_slice()).collect();
        Ok(TraceRow {
            iteration: k,
            mse_train: compute_mse(&thetas, agents, Split::Train)?,
            mse_test: if has_test {
                Some(compute_mse(&thetas, agents, Split::Test)?)
            } else {
                None
            },
            consensus_residual: consensus_residual(&thetas),
            optimality_residual: theta_star.map(|ts| optimality_residual(&thetas, ts)),
            cumulative_transmissions: cumulative,
            per_agent_transmissions: states.iter().map(|s| s.transmissions).collect(),
        })
    };

    let first = snapshot(0, &states, 0)?;
    let initial_mse = first.mse_train;
    trace.push(first)?;
    observer(0, &states);

    let mut status = RunStatus::Completed;
    for k in 1..=config.max_iterations {
        cumulative += match algorithm {
            Algorithm::Dkla => dkla_round(&mut states, graph, &contexts, config.rho)?,
            Algorithm::Coke(schedule) => coke_round(&mut states, graph, &contexts, config.rho, &schedule, k)?,
            Algorithm::Cta { step } => cta_round(&mut states, graph, agents, &weights, config.lambda, step)?,
        };
        let row = snapshot(k, &states, cumulative)?;
        let diverged = !row.mse_train.is_finite()
            || (initial_mse > 0.0 && row.mse_train > DIVERGENCE_FACTOR * initial_mse);
        let converged = match (config.consensus_tol, config.optimality_tol) {
            (None, None) => false,
            (c, o) => {
                c.is_none_or(|tol| row.consensus_residual <= tol)
                    && o.is_none_or(|tol| row.optimality_residual.is_some_and(|r| r <= tol))
            }
        };
        trace.push(row)?;
        observer(k, &states);
        if diverged {
            status = RunStatus::Diverged;
            break;
        }
        if converged {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(RunOutcome {
        trace,
        status,
        states,
    })
}
