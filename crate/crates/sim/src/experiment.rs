//! End-to-end pipeline: data, features, graph, runs and reports.

use std::fmt;
use std::path::Path;

use coke_core::data::{
    generate_synthetic, minmax_normalize, partition_to_agents, train_test_split, PartitionPlan, RawDataset,
};
use coke_core::graph::rho_upper_bound;
use coke_core::model::convexity_constants;
use coke_core::oracle::{
    centralized_rf_solution, effective_dof, gram_matrix, krr_from_agents, required_feature_count,
    rf_normal_residual, MAX_GRAM_SAMPLES,
};
use coke_core::rng::derive_seed;
use coke_core::solver::run;
use coke_core::{
    AgentDataset, Algorithm, ConvexityConstants, Graph, RandomFeatureMap, RhoBound, RunConfig, RunOutcome, RunStatus,
    SpectralConstants,
};

use crate::config::{DataSource, ExperimentConfig, Mode, PartitionMode, Topology};
use crate::error::{CoreContext, Result, SimError};
use crate::io::{load_csv, read_edge_list};
use crate::trace::{write_summary, write_trace, RunSummary, Summary, FORMAT_VERSION};

/// Everything a run needs, built once per config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub agents: Vec<AgentDataset>,
    pub graph: Graph,
    pub map: RandomFeatureMap,
    /// Centralized RF solution; `None` when the pooled training set exceeds
    /// the oracle limit.
    pub theta_star: Option<Vec<f64>>,
}

impl Prepared {
    pub fn n_train(&self) -> usize {
        self.agents.iter().map(AgentDataset::n_train).sum()
    }
}

fn ctx(cfg: &ExperimentConfig, what: &str) -> String {
    format!("{}: {what}", cfg.source_path.display())
}

/// Per-agent raw shards with jointly normalized features, before splitting.
pub fn load_shards(cfg: &ExperimentConfig) -> Result<Vec<RawDataset>> {
    let n = cfg.network.n_agents;
    let shards = match cfg.data.source {
        DataSource::Synthetic => {
            generate_synthetic(&cfg.synthetic_spec(), n).context(ctx(cfg, "generating synthetic data"))?.1
        }
        DataSource::Csv => {
            let path = cfg.resolve(cfg.data.path.as_deref().expect("validated"));
            let pooled = load_csv(&path, cfg.data.has_header)?;
            let (mut norm, _) = minmax_normalize(&[pooled]).context(ctx(cfg, "normalizing features"))?;
            let pooled = norm.pop().expect("one part");
            let p = &cfg.partition;
            let plan = match p.mode {
                PartitionMode::Equal => PartitionPlan::equal(pooled.len(), n, cfg.data.train_fraction, p.seed),
                PartitionMode::Random => PartitionPlan::random(
                    n,
                    p.min_size.expect("validated"),
                    p.max_size.expect("validated"),
                    cfg.data.train_fraction,
                    p.seed,
                ),
            }
            .context(ctx(cfg, "partition plan"))?;
            return partition_to_agents(&pooled, &plan).context(ctx(cfg, "partitioning data"));
        }
    };
    Ok(minmax_normalize(&shards).context(ctx(cfg, "normalizing features"))?.0)
}

pub fn build_graph(cfg: &ExperimentConfig) -> Result<Graph> {
    let net = &cfg.network;
    let g = match net.topology {
        Topology::Random => Graph::random_connected(net.n_agents, net.edge_prob, net.seed),
        Topology::Complete => Graph::complete(net.n_agents),
        Topology::Path => Graph::path(net.n_agents),
        Topology::Edges => {
            let path = cfg.resolve(net.edges_path.as_deref().expect("validated"));
            Graph::from_edges(net.n_agents, &read_edge_list(&path)?)
        }
    };
    g.context(ctx(cfg, "building graph"))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let shards = load_shards(cfg)?;
    let dim = shards[0].dim();
    let f = &cfg.features;
    let map = RandomFeatureMap::new(f.seed, f.count, dim, f.bandwidth, f.variant.into())
        .context(ctx(cfg, "sampling random features"))?;
    let agents = shards
        .iter()
        .enumerate()
        .map(|(i, shard)| {
            let (train, test) = train_test_split(shard, cfg.data.train_fraction, derive_seed(cfg.data.split_seed, i as u64))
                .context(ctx(cfg, &format!("splitting agent {i}")))?;
            AgentDataset::new(&map, train, test).context(ctx(cfg, &format!("featurizing agent {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = build_graph(cfg)?;
    let n_train: usize = agents.iter().map(AgentDataset::n_train).sum();
    let theta_star = if n_train <= MAX_GRAM_SAMPLES {
        Some(centralized_rf_solution(&agents, cfg.solver.lambda).context(ctx(cfg, "centralized solution"))?)
    } else {
        None
    };
    Ok(Prepared {
        agents,
        graph,
        map,
        theta_star,
    })
}

pub fn algorithm(cfg: &ExperimentConfig, mode: Mode) -> Result<Algorithm> {
    Ok(match mode {
        Mode::Dkla => Algorithm::Dkla,
        Mode::Coke => Algorithm::Coke(cfg.schedule().map_err(|m| SimError::config(&cfg.source_path, m))?),
        Mode::Cta => Algorithm::Cta {
            step: cfg.solver.cta_step,
        },
    })
}

pub fn run_config(cfg: &ExperimentConfig) -> RunConfig {
    let s = &cfg.solver;
    RunConfig {
        lambda: s.lambda,
        rho: s.rho,
        max_iterations: s.max_iterations,
        consensus_tol: s.consensus_tol,
        optimality_tol: s.optimality_tol,
    }
}

pub fn run_mode(cfg: &ExperimentConfig, prepared: &Prepared, mode: Mode) -> Result<RunOutcome> {
    run(
        &run_config(cfg),
        &prepared.graph,
        &prepared.agents,
        algorithm(cfg, mode)?,
        prepared.theta_star.as_deref(),
    )
    .context(ctx(cfg, &format!("running {}", mode.name())))
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::Converged => "converged",
        RunStatus::Diverged => "diverged",
    }
}

pub fn trace_file_name(mode: Mode) -> String {
    format!("trace_{}.csv", mode.name())
}

pub const SUMMARY_FILE: &str = "summary.toml";

/// Runs each mode, writing `trace_<mode>.csv` per mode and `summary.toml`
/// into `out_dir`. Divergence is reported in the summary, not as an error.
pub fn run_experiment(cfg: &ExperimentConfig, modes: &[Mode], out_dir: &Path) -> Result<Summary> {
    let prepared = prepare(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    let mut runs = Vec::with_capacity(modes.len());
    for &mode in modes {
        let outcome = run_mode(cfg, &prepared, mode)?;
        let file = trace_file_name(mode);
        write_trace(&out_dir.join(&file), &outcome.trace)?;
        let last = outcome.trace.last().expect("trace holds the initial row");
        runs.push(RunSummary {
            mode: mode.name().into(),
            status: status_name(outcome.status).into(),
            trace_file: file,
            iterations: last.iteration,
            final_mse_train: last.mse_train,
            final_mse_test: last.mse_test,
            final_consensus_residual: last.consensus_residual,
            final_optimality_residual: last.optimality_residual,
            total_transmissions: last.cumulative_transmissions,
            per_agent_transmissions: last.per_agent_transmissions.clone(),
        });
    }
    let summary = Summary {
        format_version: FORMAT_VERSION,
        config: cfg.source_path.display().to_string(),
        has_optimum: prepared.theta_star.is_some(),
        runs,
    };
    write_summary(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Centralized solutions and random-feature capacity diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub n_train: usize,
    pub feature_dim: usize,
    pub theta_star_norm: f64,
    /// Relative residual of the normal equations at the computed optimum.
    pub theta_star_residual: f64,
    pub rf_train_mse: f64,
    pub krr_train_mse: f64,
    pub krr_jitter: f64,
    pub effective_dof: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub required_features: u64,
    pub configured_features: usize,
}

pub fn oracle_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let p = prepare(cfg)?;
    let lambda = cfg.solver.lambda;
    let n_train = p.n_train();
    let Some(theta_star) = p.theta_star.as_deref() else {
        return Err(SimError::Core {
            context: ctx(cfg, "oracle"),
            source: coke_core::Error::InvalidArgument(format!(
                "{n_train} training samples exceed the oracle limit of {MAX_GRAM_SAMPLES}"
            )),
        });
    };
    let c = |w: &str| ctx(cfg, w);
    let residual = rf_normal_residual(&p.agents, lambda, theta_star).context(c("normal residual"))?;
    let rf_train_mse = coke_core::metrics::compute_mse(
        &vec![theta_star; p.agents.len()],
        &p.agents,
        coke_core::Split::Train,
    )
    .context(c("RF training error"))?;
    let krr = krr_from_agents(&p.agents, lambda, cfg.features.bandwidth).context(c("kernel ridge solution"))?;
    let mut sq = 0.0;
    for a in &p.agents {
        for (x, y) in a.features.row_iter().zip(&a.labels) {
            let r = krr.predict(x).context(c("kernel prediction"))? - y;
            sq += r * r;
        }
    }
    let pooled: Vec<RawDataset> = p
        .agents
        .iter()
        .map(|a| RawDataset::new(a.features.clone(), a.labels.clone()).expect("consistent shard"))
        .collect();
    let pooled = RawDataset::concat(&pooled).context(c("pooling samples"))?;
    let gram = gram_matrix(&pooled.features, cfg.features.bandwidth).context(c("Gram matrix"))?;
    let d_eff = effective_dof(&gram, lambda).context(c("effective degrees of freedom"))?;
    let required = required_feature_count(d_eff, lambda, cfg.oracle.epsilon, cfg.oracle.delta)
        .context(c("required feature count"))?;
    Ok(OracleReport {
        n_train,
        feature_dim: p.map.feature_dim(),
        theta_star_norm: coke_core::linalg::norm(theta_star),
        theta_star_residual: residual,
        rf_train_mse,
        krr_train_mse: sq / n_train as f64,
        krr_jitter: krr.jitter,
        effective_dof: d_eff,
        epsilon: cfg.oracle.epsilon,
        delta: cfg.oracle.delta,
        required_features: required,
        configured_features: cfg.features.count,
    })
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "training samples        {}", self.n_train)?;
        writeln!(f, "feature dimension       {}", self.feature_dim)?;
        writeln!(f, "theta* norm             {:e}", self.theta_star_norm)?;
        writeln!(f, "theta* residual         {:e}", self.theta_star_residual)?;
        writeln!(f, "RF train MSE            {:e}", self.rf_train_mse)?;
        writeln!(f, "KRR train MSE           {:e}", self.krr_train_mse)?;
        if self.krr_jitter > 0.0 {
            writeln!(f, "KRR jitter              {:e}", self.krr_jitter)?;
        }
        writeln!(f, "effective dof           {:e}", self.effective_dof)?;
        writeln!(
            f,
            "required L (eps={}, delta={})  {}  (configured L = {})",
            self.epsilon, self.delta, self.required_features, self.configured_features
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectraReport {
    pub spectra: SpectralConstants,
    pub convexity: ConvexityConstants,
    pub rho_bound: RhoBound,
    pub configured_rho: f64,
}

pub fn spectra_report(cfg: &ExperimentConfig) -> Result<SpectraReport> {
    let p = prepare(cfg)?;
    let spectra = SpectralConstants::of(&p.graph).context(ctx(cfg, "incidence spectra"))?;
    let convexity = convexity_constants(&p.agents, cfg.solver.lambda, p.agents.len())
        .context(ctx(cfg, "convexity constants"))?;
    let rho_bound = rho_upper_bound(convexity.m, convexity.big_m, &spectra, &(&cfg.bounds).into())
        .context(ctx(cfg, "penalty bound"))?;
    Ok(SpectraReport {
        spectra,
        convexity,
        rho_bound,
        configured_rho: cfg.solver.rho,
    })
}

impl fmt::Display for SpectraReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sigma_max(S+)      {:.12}", self.spectra.sigma_max_unsigned)?;
        writeln!(f, "sigma_min(S-)      {:.12}", self.spectra.sigma_min_signed_nonzero)?;
        writeln!(f, "m                  {:e}", self.convexity.m)?;
        writeln!(f, "M                  {:e}", self.convexity.big_m)?;
        match self.rho_bound {
            RhoBound::Bound(b) => {
                let verdict = if self.configured_rho < b { "within" } else { "outside" };
                writeln!(f, "rho bound          {b:e}")?;
                writeln!(f, "configured rho     {:e} ({verdict} the bound)", self.configured_rho)
            }
            RhoBound::Infeasible => writeln!(f, "rho bound          infeasible for these constants"),
        }
    }
}

/// The raw synthetic samples of all agents, concatenated in agent order.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<RawDataset> {
    if cfg.data.source != DataSource::Synthetic {
        return Err(SimError::config(&cfg.source_path, "gen-data needs data.source = \"synthetic\""));
    }
    let (_, parts) = generate_synthetic(&cfg.synthetic_spec(), cfg.network.n_agents)
        .context(ctx(cfg, "generating synthetic data"))?;
    RawDataset::concat(&parts).context(ctx(cfg, "pooling samples"))
}
