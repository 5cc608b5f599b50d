//! Experiment configuration, read from TOML.
//!
//! Every section except `[network]` and `[solver]` may be omitted; missing
//! keys take the defaults documented on each field. Relative paths are
//! resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use coke_core::data::SyntheticSpec;
use coke_core::{CensoringSchedule, FeatureVariant, PenaltyConstants};
use serde::Deserialize;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    pub network: NetworkConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub censoring: CensoringConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Directory relative paths are resolved against; set by [`ExperimentConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub source_path: PathBuf,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    /// CSV file, required when `source = "csv"`.
    pub path: Option<PathBuf>,
    pub has_header: bool,
    pub train_fraction: f64,
    /// Seed of the synthetic generator.
    pub seed: u64,
    /// Base seed of the per-agent train/test shuffles.
    pub split_seed: u64,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Synthetic,
            path: None,
            has_header: false,
            train_fraction: 0.7,
            seed: 1,
            split_seed: 2,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_centers: usize,
    pub input_dim: usize,
    pub gen_bandwidth: f64,
    pub noise_std: f64,
    pub per_agent_min: usize,
    pub per_agent_max: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        SyntheticConfig {
            n_centers: s.n_centers,
            input_dim: s.input_dim,
            gen_bandwidth: s.gen_bandwidth,
            noise_std: s.noise_std,
            per_agent_min: s.per_agent_min,
            per_agent_max: s.per_agent_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// `⌊T/N⌋` samples per agent.
    #[default]
    Equal,
    /// Sizes uniform on `[min_size, max_size]`.
    Random,
}

/// How a CSV dataset is cut into shards; ignored for synthetic data.
#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub mode: PartitionMode,
    pub min_size: Option<usize>,
    pub max_size: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Independent edges with probability `edge_prob`, resampled until connected.
    #[default]
    Random,
    Complete,
    Path,
    /// Edge list read from `edges_path`.
    Edges,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_agents: usize,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    #[serde(default)]
    pub edges_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_edge_prob() -> f64 {
    0.3
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    #[default]
    Paired,
    Cosine,
}

impl From<VariantName> for FeatureVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Paired => FeatureVariant::PairedTrig,
            VariantName::Cosine => FeatureVariant::CosinePhase,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub variant: VariantName,
    /// Number of sampled frequencies `L`.
    pub count: usize,
    pub bandwidth: f64,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            variant: VariantName::Paired,
            count: 50,
            bandwidth: 1.0,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dkla,
    Coke,
    Cta,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Dkla, Mode::Coke, Mode::Cta];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Dkla => "dkla",
            Mode::Coke => "coke",
            Mode::Cta => "cta",
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub rho: f64,
    #[serde(default = "default_cta_step")]
    pub cta_step: f64,
    pub max_iterations: usize,
    #[serde(default)]
    pub consensus_tol: Option<f64>,
    #[serde(default)]
    pub optimality_tol: Option<f64>,
    /// Modes run when the command line does not pick one.
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
}

fn default_cta_step() -> f64 {
    0.99
}

fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CensoringConfig {
    pub v: f64,
    pub mu: f64,
}

impl Default for CensoringConfig {
    fn default() -> Self {
        CensoringConfig { v: 1.0, mu: 0.95 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub nu: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let p = PenaltyConstants::default();
        BoundsConfig {
            eta1: p.eta1,
            eta2: p.eta2,
            eta3: p.eta3,
            nu: p.nu,
        }
    }
}

impl From<&BoundsConfig> for PenaltyConstants {
    fn from(b: &BoundsConfig) -> Self {
        PenaltyConstants {
            eta1: b.eta1,
            eta2: b.eta2,
            eta3: b.eta3,
            nu: b.nu,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            epsilon: 0.5,
            delta: 0.1,
        }
    }
}

impl ExperimentConfig {
    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::config(path, format!("cannot read: {e}")))?;
        let mut cfg = Self::parse(&text).map_err(|m| SimError::config(path, m))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.source_path = path.to_path_buf();
        Ok(cfg)
    }

    /// Parses and validates config text; relative paths resolve against the
    /// working directory.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let s = &self.data.synthetic;
        SyntheticSpec {
            n_centers: s.n_centers,
            input_dim: s.input_dim,
            gen_bandwidth: s.gen_bandwidth,
            noise_std: s.noise_std,
            per_agent_min: s.per_agent_min,
            per_agent_max: s.per_agent_max,
            seed: self.data.seed,
        }
    }

    pub fn schedule(&self) -> std::result::Result<CensoringSchedule, String> {
        CensoringSchedule::new(self.censoring.v, self.censoring.mu).map_err(|e| e.to_string())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(format!("data.train_fraction must lie in (0, 1), got {}", d.train_fraction));
        }
        match d.source {
            DataSource::Csv if d.path.is_none() => return Err("data.path is required for csv data".into()),
            DataSource::Synthetic => self.synthetic_spec().validate().map_err(|e| format!("data.synthetic: {e}"))?,
            DataSource::Csv => {}
        }
        if self.partition.mode == PartitionMode::Random
            && (self.partition.min_size.is_none() || self.partition.max_size.is_none())
        {
            return Err("partition.min_size and partition.max_size are required for random partitions".into());
        }
        let n = &self.network;
        if n.n_agents == 0 {
            return Err("network.n_agents must be positive".into());
        }
        match n.topology {
            Topology::Random if !(n.edge_prob > 0.0 && n.edge_prob <= 1.0) && n.n_agents > 1 => {
                return Err(format!("network.edge_prob must lie in (0, 1], got {}", n.edge_prob));
            }
            Topology::Edges if n.edges_path.is_none() => {
                return Err("network.edges_path is required for topology = \"edges\"".into());
            }
            _ => {}
        }
        if self.features.count == 0 {
            return Err("features.count must be positive".into());
        }
        positive("features.bandwidth", self.features.bandwidth)?;
        let s = &self.solver;
        positive("solver.lambda", s.lambda)?;
        positive("solver.rho", s.rho)?;
        if !(s.cta_step > 0.0 && s.cta_step <= 1.0) {
            return Err(format!("solver.cta_step must lie in (0, 1], got {}", s.cta_step));
        }
        for (name, tol) in [("solver.consensus_tol", s.consensus_tol), ("solver.optimality_tol", s.optimality_tol)] {
            if let Some(t) = tol {
                positive(name, t)?;
            }
        }
        if s.modes.is_empty() {
            return Err("solver.modes must name at least one mode".into());
        }
        self.schedule().map_err(|e| format!("censoring: {e}"))?;
        let b = &self.bounds;
        for (name, v) in [("bounds.eta1", b.eta1), ("bounds.eta2", b.eta2), ("bounds.eta3", b.eta3)] {
            positive(name, v)?;
        }
        if b.nu.is_nan() || b.nu <= 1.0 {
            return Err(format!("bounds.nu must exceed 1, got {}", b.nu));
        }
        let o = &self.oracle;
        if !(o.epsilon > 0.0 && o.epsilon < 1.0) || !(o.delta > 0.0 && o.delta < 1.0) {
            return Err("oracle.epsilon and oracle.delta must lie in (0, 1)".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[network]\nn_agents = 3\n[solver]\nlambda = 1e-3\nrho = 1e-2\nmax_iterations = 10\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.data.source, DataSource::Synthetic);
        assert_eq!(c.solver.modes, Mode::ALL.to_vec());
        assert_eq!(c.solver.cta_step, 0.99);
        assert_eq!(c.censoring, CensoringConfig { v: 1.0, mu: 0.95 });
        assert_eq!(c.features.variant, VariantName::Paired);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}bogus = 1\n")).is_err());
        let bad_rho = MINIMAL.replace("rho = 1e-2", "rho = 0.0");
        assert!(ExperimentConfig::parse(&bad_rho).unwrap_err().contains("solver.rho"));
        let csv_no_path = format!("{MINIMAL}[data]\nsource = \"csv\"\n");
        assert!(ExperimentConfig::parse(&csv_no_path).is_err());
        let bad_nu = format!("{MINIMAL}[bounds]\nnu = 1.0\n");
        assert!(ExperimentConfig::parse(&bad_nu).is_err());
    }
}
