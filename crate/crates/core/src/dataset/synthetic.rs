use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::rng_from;

/// Mixture of isotropic Gaussians, one per class, clipped to the unit cube.
///
/// The class means depend only on `means_seed`, so every draw from the same
/// spec comes from the same distribution regardless of the sampling seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub class_count: usize,
    pub dim: usize,
    pub means_seed: u64,
    /// Standard deviation of every coordinate.
    pub spread: f64,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::config("synthetic source needs at least 2 classes"));
        }
        if self.dim == 0 {
            return Err(Error::config("synthetic dimension must be at least 1"));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(Error::config(format!(
                "synthetic spread must be positive, got {}",
                self.spread
            )));
        }
        Ok(())
    }

    /// Class means, each uniform in `[0, 1]^dim`.
    pub fn means(&self) -> Vec<Vec<f64>> {
        let mut rng = rng_from(self.means_seed);
        let unit = Uniform::new_inclusive(0.0, 1.0);
        (0..self.class_count)
            .map(|_| (0..self.dim).map(|_| unit.sample(&mut rng)).collect())
            .collect()
    }
}

/// Draws `n` labeled points; class sizes differ by at most one.
pub fn synthesize_gaussian(spec: &GaussianSpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    spec.validate().map_err(|e| Error::input(e.to_string()))?;
    if n < spec.class_count {
        return Err(Error::input(format!(
            "need at least {} samples for {} classes, got {n}",
            spec.class_count, spec.class_count
        )));
    }
    let means = spec.means();
    let mut rng = rng_from(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % spec.class_count).collect();
    labels.shuffle(&mut rng);

    let mut data = Vec::with_capacity(n * spec.dim);
    for &label in &labels {
        for &mu in &means[label] {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push((mu + spec.spread * z).clamp(0.0, 1.0));
        }
    }
    LabeledDataset::new(Tensor::from_vec(n, spec.dim, data)?, labels, spec.class_count)
}
