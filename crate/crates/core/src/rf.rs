//! Random Fourier features for the Gaussian kernel.
//!
//! The Gaussian kernel `exp(−‖x−x′‖²/(2σ²))` is the characteristic function
//! of `N(0, σ⁻²I)`, so sampling frequencies from that law and averaging
//! trigonometric products gives an unbiased kernel estimate. All agents build
//! the map from the same seed, which makes the parameter vector in feature
//! space a shared, data-independent object they can agree on.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::SeededRng;

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureVariant {
    /// `[cos(ωᵀx), sin(ωᵀx)]` per frequency; output size `2L`, unit norm.
    #[default]
    PairedTrig,
    /// `√2·cos(ωᵀx + b)` per frequency with a uniform phase `b ∈ [0, 2π)`;
    /// output size `L`.
    CosinePhase,
}

/// A shared random feature map `φ_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureMap {
    frequencies: Matrix,
    phases: Option<Vec<f64>>,
    variant: FeatureVariant,
    bandwidth: f64,
    seed: u64,
}

/// Draws `count` i.i.d. rows from `N(0, σ⁻²I_dim)`.
pub fn sample_frequencies(seed: u64, count: usize, dim: usize, bandwidth: f64) -> Result<Matrix> {
    let mut rng = SeededRng::new(seed);
    sample_frequencies_with(&mut rng, count, dim, bandwidth)
}

fn sample_frequencies_with(
    rng: &mut SeededRng,
    count: usize,
    dim: usize,
    bandwidth: f64,
) -> Result<Matrix> {
    if count == 0 {
        return Err(Error::invalid("number of random features must be positive"));
    }
    if dim == 0 {
        return Err(Error::invalid("input dimension must be positive"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::invalid("kernel bandwidth must be positive and finite"));
    }
    let inv = 1.0 / bandwidth;
    let data = (0..count * dim).map(|_| rng.gaussian() * inv).collect();
    Matrix::from_vec(count, dim, data)
}

impl RandomFeatureMap {
    /// Draws the frequencies, then (for [`FeatureVariant::CosinePhase`]) the
    /// phases from the same stream, in index order.
    pub fn new(
        seed: u64,
        count: usize,
        dim: usize,
        bandwidth: f64,
        variant: FeatureVariant,
    ) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        let frequencies = sample_frequencies_with(&mut rng, count, dim, bandwidth)?;
        let phases = match variant {
            FeatureVariant::PairedTrig => None,
            FeatureVariant::CosinePhase => {
                Some((0..count).map(|_| TWO_PI * rng.uniform()).collect())
            }
        };
        Ok(RandomFeatureMap {
            frequencies,
            phases,
            variant,
            bandwidth,
            seed,
        })
    }

    /// Builds a map from explicit frequencies (and phases for the cosine
    /// variant). Mostly useful for hand-built test cases.
    pub fn from_parts(
        frequencies: Matrix,
        phases: Option<Vec<f64>>,
        bandwidth: f64,
    ) -> Result<Self> {
        if frequencies.rows() == 0 || frequencies.cols() == 0 {
            return Err(Error::invalid("frequency matrix must be non-empty"));
        }
        let variant = match &phases {
            None => FeatureVariant::PairedTrig,
            Some(p) => {
                if p.len() != frequencies.rows() {
                    return Err(Error::mismatch("phases", frequencies.rows(), p.len()));
                }
                if p.iter().any(|b| !(0.0..=TWO_PI).contains(b)) {
                    return Err(Error::invalid("phases must lie in [0, 2π]"));
                }
                FeatureVariant::CosinePhase
            }
        };
        Ok(RandomFeatureMap {
            frequencies,
            phases,
            variant,
            bandwidth,
            seed: 0,
        })
    }

    pub fn frequencies(&self) -> &Matrix {
        &self.frequencies
    }

    pub fn phases(&self) -> Option<&[f64]> {
        self.phases.as_deref()
    }

    pub fn variant(&self) -> FeatureVariant {
        self.variant
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of sampled frequencies `L`.
    pub fn num_frequencies(&self) -> usize {
        self.frequencies.rows()
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.frequencies.cols()
    }

    /// Output dimension `D`: `2L` or `L` depending on the variant.
    pub fn feature_dim(&self) -> usize {
        match self.variant {
            FeatureVariant::PairedTrig => 2 * self.num_frequencies(),
            FeatureVariant::CosinePhase => self.num_frequencies(),
        }
    }

    /// `φ_L(x)`.
    pub fn map_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.feature_dim()];
        self.map_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes `φ_L(x)` into `out`. Paired features are laid out as
    /// `[cos_1, sin_1, cos_2, sin_2, …]`.
    pub fn map_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::mismatch("feature map input", self.input_dim(), x.len()));
        }
        if out.len() != self.feature_dim() {
            return Err(Error::mismatch("feature map output", self.feature_dim(), out.len()));
        }
        let l = self.num_frequencies();
        let scale = libm::sqrt(1.0 / l as f64);
        match (&self.variant, &self.phases) {
            (FeatureVariant::PairedTrig, _) => {
                for (k, omega) in self.frequencies.row_iter().enumerate() {
                    let (s, c) = libm::sincos(dot(omega, x));
                    out[2 * k] = scale * c;
                    out[2 * k + 1] = scale * s;
                }
            }
            (FeatureVariant::CosinePhase, Some(phases)) => {
                let scale = scale * core::f64::consts::SQRT_2;
                for ((o, omega), b) in out.iter_mut().zip(self.frequencies.row_iter()).zip(phases) {
                    *o = scale * libm::cos(dot(omega, x) + b);
                }
            }
            (FeatureVariant::CosinePhase, None) => unreachable!("cosine variant always has phases"),
        }
        Ok(())
    }

    /// Maps every row of `points`; row `t` of the result is `φ_L(points[t])`.
    pub fn map_rows(&self, points: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(points.rows(), self.feature_dim());
        for t in 0..points.rows() {
            self.map_into(points.row(t), out.row_mut(t))?;
        }
        Ok(out)
    }

    /// `κ̂_L(x, x′) = φ_L(x)ᵀφ_L(x′)`.
    pub fn approx_kernel(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let a = self.map_point(x)?;
        let b = self.map_point(x_prime)?;
        Ok(dot(&a, &b))
    }
}

/// `exp(−‖x−x′‖²/(2σ²))`.
pub fn exact_gaussian_kernel(x: &[f64], x_prime: &[f64], bandwidth: f64) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::mismatch("kernel arguments", x.len(), x_prime.len()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::invalid("kernel bandwidth must be positive"));
    }
    let sq: f64 = x.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::exp(-sq / (2.0 * bandwidth * bandwidth)))
}
