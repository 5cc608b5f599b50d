#![allow(dead_code)]

use coke_core::data::{generate_synthetic, minmax_normalize, train_test_split, RawDataset, SyntheticSpec};
use coke_core::rng::{derive_seed, SeededRng};
use coke_core::{AgentDataset, FeatureVariant, Graph, Matrix, RandomFeatureMap};

/// Small networked instance: `n_agents` shards of `per_agent` samples, 70/30 split.
pub struct Instance {
    pub graph: Graph,
    pub map: RandomFeatureMap,
    pub agents: Vec<AgentDataset>,
}

pub fn instance(n_agents: usize, per_agent: usize, n_freq: usize, p: f64, seed: u64) -> Instance {
    let spec = SyntheticSpec {
        per_agent_min: per_agent,
        per_agent_max: per_agent,
        seed,
        ..SyntheticSpec::default()
    };
    let (_, raw) = generate_synthetic(&spec, n_agents).unwrap();
    let (raw, _) = minmax_normalize(&raw).unwrap();
    let map = RandomFeatureMap::new(seed + 1, n_freq, 5, 1.0, FeatureVariant::PairedTrig).unwrap();
    let agents = raw
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let (tr, te) = train_test_split(d, 0.7, derive_seed(seed, i as u64)).unwrap();
            AgentDataset::new(&map, tr, te).unwrap()
        })
        .collect();
    let graph = Graph::random_connected(n_agents, p, seed + 2).unwrap();
    Instance { graph, map, agents }
}

/// Agent with an arbitrary hand-made design (rows are feature vectors).
pub fn agent_from_design(design: Matrix, labels: Vec<f64>) -> AgentDataset {
    let t = design.rows();
    AgentDataset {
        features: Matrix::zeros(t, 1),
        labels,
        design,
        test_features: Matrix::zeros(0, 1),
        test_labels: vec![],
        test_design: Matrix::zeros(0, 0),
    }
}

pub fn random_agent(rng: &mut SeededRng, t: usize, dim: usize) -> AgentDataset {
    let design = Matrix::from_vec(t, dim, (0..t * dim).map(|_| rng.gaussian()).collect()).unwrap();
    let labels = (0..t).map(|_| rng.gaussian()).collect();
    agent_from_design(design, labels)
}

pub fn raw(rows: &[&[f64]], labels: &[f64]) -> RawDataset {
    RawDataset::new(Matrix::from_rows(rows).unwrap(), labels.to_vec()).unwrap()
}

pub fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}
