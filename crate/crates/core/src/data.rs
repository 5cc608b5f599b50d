//! Synthetic data, normalization, splitting and partitioning across agents.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rf::exact_gaussian_kernel;
use crate::rng::{derive_seed, SeededRng};

/// Features (one row per sample) with a label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
}

impl RawDataset {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::mismatch("labels", features.rows(), labels.len()));
        }
        Ok(RawDataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> RawDataset {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        RawDataset {
            features: Matrix::from_vec(indices.len(), d, data).expect("row lengths agree"),
            labels,
        }
    }

    /// Stacks datasets vertically.
    pub fn concat(parts: &[RawDataset]) -> Result<RawDataset> {
        let d = parts.first().map_or(0, RawDataset::dim);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim() != d {
                return Err(Error::mismatch("dataset dimension", d, p.dim()));
            }
            data.extend_from_slice(p.features.as_slice());
            labels.extend_from_slice(&p.labels);
        }
        RawDataset::new(Matrix::from_vec(labels.len(), d, data)?, labels)
    }
}

/// Parameters of the sum-of-Gaussian-bumps regression model
/// `y = Σ_m b_m κ(c_m, x) + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_centers: usize,
    pub input_dim: usize,
    /// Bandwidth of the generating kernel.
    pub gen_bandwidth: f64,
    /// Standard deviation of the additive label noise.
    pub noise_std: f64,
    /// Inclusive range of per-agent sample counts.
    pub per_agent_min: usize,
    pub per_agent_max: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_centers: 50,
            input_dim: 5,
            gen_bandwidth: 5.0,
            noise_std: libm::sqrt(0.1),
            per_agent_min: 4000,
            per_agent_max: 6000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_centers == 0 || self.input_dim == 0 {
            return Err(Error::invalid("synthetic spec needs at least one center and one input dimension"));
        }
        if !(self.gen_bandwidth > 0.0) {
            return Err(Error::invalid("generating bandwidth must be positive"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::invalid("noise standard deviation must be non-negative"));
        }
        if self.per_agent_min == 0 || self.per_agent_min > self.per_agent_max {
            return Err(Error::invalid(format!(
                "per-agent sample range [{}, {}] is empty or starts at zero",
                self.per_agent_min, self.per_agent_max
            )));
        }
        Ok(())
    }
}

/// The shared part of the synthetic model.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    pub centers: Matrix,
    pub weights: Vec<f64>,
    pub bandwidth: f64,
}

impl SyntheticModel {
    /// Noise-free label `Σ_m b_m κ(c_m, x)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.centers
            .row_iter()
            .zip(&self.weights)
            .map(|(c, b)| b * exact_gaussian_kernel(c, x, self.bandwidth).expect("dimensions agree"))
            .sum()
    }
}

/// Draws the shared centers and weights, then each agent's sample count,
/// inputs and noisy labels, all from one stream seeded by `spec.seed`.
/// Centers and inputs are standard normal, weights uniform on `[0, 1)`.
pub fn generate_synthetic(spec: &SyntheticSpec, n_agents: usize) -> Result<(SyntheticModel, Vec<RawDataset>)> {
    spec.validate()?;
    if n_agents == 0 {
        return Err(Error::invalid("need at least one agent"));
    }
    let mut rng = SeededRng::new(spec.seed);
    let d = spec.input_dim;
    let centers = Matrix::from_vec(
        spec.n_centers,
        d,
        (0..spec.n_centers * d).map(|_| rng.gaussian()).collect(),
    )?;
    let weights = (0..spec.n_centers).map(|_| rng.uniform()).collect();
    let model = SyntheticModel {
        centers,
        weights,
        bandwidth: spec.gen_bandwidth,
    };
    let mut agents = Vec::with_capacity(n_agents);
    for _ in 0..n_agents {
        let t = rng.between_inclusive(spec.per_agent_min as u64, spec.per_agent_max as u64) as usize;
        let features = Matrix::from_vec(t, d, (0..t * d).map(|_| rng.gaussian()).collect())?;
        let labels = features
            .row_iter()
            .map(|x| model.evaluate(x) + spec.noise_std * rng.gaussian())
            .collect();
        agents.push(RawDataset::new(features, labels)?);
    }
    Ok((model, agents))
}

/// Per-column affine map onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Fits on the union of all rows of all `parts`.
    pub fn fit(parts: &[&Matrix]) -> Result<Self> {
        let d = parts.first().map_or(0, |m| m.cols());
        let mut min = alloc::vec![f64::INFINITY; d];
        let mut max = alloc::vec![f64::NEG_INFINITY; d];
        let mut seen = 0usize;
        for m in parts {
            if m.cols() != d {
                return Err(Error::mismatch("normalization input", d, m.cols()));
            }
            for row in m.row_iter() {
                for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                    *lo = lo.min(v);
                    *hi = hi.max(v);
                }
            }
            seen += m.rows();
        }
        if seen == 0 || d == 0 {
            return Err(Error::invalid("cannot normalize an empty dataset"));
        }
        Ok(MinMaxScaler { min, max })
    }

    /// Maps each column through `(v − min)/(max − min)`; constant columns map to 0.
    /// Values outside the fitted range are not clamped.
    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.min.len() {
            return Err(Error::mismatch("normalization input", self.min.len(), m.cols()));
        }
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let span = self.max[c] - self.min[c];
                *v = if span > 0.0 { (*v - self.min[c]) / span } else { 0.0 };
            }
        }
        Ok(out)
    }
}

/// Fits a scaler jointly over all datasets and applies it to each.
pub fn minmax_normalize(parts: &[RawDataset]) -> Result<(Vec<RawDataset>, MinMaxScaler)> {
    let mats: Vec<&Matrix> = parts.iter().map(|p| &p.features).collect();
    let scaler = MinMaxScaler::fit(&mats)?;
    let out = parts
        .iter()
        .map(|p| RawDataset::new(scaler.transform(&p.features)?, p.labels.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((out, scaler))
}

/// Seeded shuffle, then the first `⌊fraction·T⌋` rows go to training.
pub fn train_test_split(data: &RawDataset, fraction: f64, seed: u64) -> Result<(RawDataset, RawDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    if data.len() < 2 {
        return Err(Error::invalid("need at least two samples to split"));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    SeededRng::new(seed).shuffle(&mut idx);
    let cut = libm::floor(fraction * data.len() as f64) as usize;
    Ok((data.select(&idx[..cut]), data.select(&idx[cut..])))
}

/// Largest allowed `(max − min)/min` over planned agent sizes.
pub const MAX_SIZE_IMBALANCE: f64 = 10.0;

/// How a pooled dataset is cut into per-agent shards.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    sizes: Vec<usize>,
    pub train_fraction: f64,
    pub seed: u64,
}

impl PartitionPlan {
    /// Fails when any size is zero or the sizes are not of the same order of
    /// magnitude (`(max − min)/min ≥ 10`).
    pub fn new(sizes: Vec<usize>, train_fraction: f64, seed: u64) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("partition plan needs at least one agent"));
        }
        let min = *sizes.iter().min().expect("non-empty");
        let max = *sizes.iter().max().expect("non-empty");
        if min == 0 {
            return Err(Error::invalid("every agent needs at least one sample"));
        }
        if (max - min) as f64 / min as f64 >= MAX_SIZE_IMBALANCE {
            return Err(Error::invalid(format!(
                "agent sizes {min}..{max} are too unbalanced"
            )));
        }
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie in (0, 1)"));
        }
        Ok(PartitionPlan {
            sizes,
            train_fraction,
            seed,
        })
    }

    /// `n_agents` shards of `⌊total/n_agents⌋` samples each.
    pub fn equal(total: usize, n_agents: usize, train_fraction: f64, seed: u64) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::invalid("partition plan needs at least one agent"));
        }
        Self::new(alloc::vec![total / n_agents; n_agents], train_fraction, seed)
    }

    /// Sizes drawn uniformly from the inclusive range `[min, max]`.
    pub fn random(n_agents: usize, min: usize, max: usize, train_fraction: f64, seed: u64) -> Result<Self> {
        if min > max {
            return Err(Error::invalid("empty size range"));
        }
        let mut rng = SeededRng::new(derive_seed(seed, 0x5153));
        let sizes = (0..n_agents)
            .map(|_| rng.between_inclusive(min as u64, max as u64) as usize)
            .collect();
        Self::new(sizes, train_fraction, seed)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// Seeded shuffle of the pooled rows, then contiguous blocks of the planned
/// sizes. Samples beyond `Σ sizes` are dropped.
pub fn partition_to_agents(data: &RawDataset, plan: &PartitionPlan) -> Result<Vec<RawDataset>> {
    if plan.total() > data.len() {
        return Err(Error::invalid(format!(
            "plan needs {} samples but the dataset has {}",
            plan.total(),
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    SeededRng::new(plan.seed).shuffle(&mut idx);
    let mut start = 0;
    Ok(plan
        .sizes
        .iter()
        .map(|&s| {
            let block = data.select(&idx[start..start + s]);
            start += s;
            block
        })
        .collect())
}
