use rand::RngCore;

use super::SurfaceFamily;
use crate::error::{Error, Result};

/// Sample mean of a batch and the estimated variance of that mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEstimate {
    pub mean: f64,
    /// Unbiased sample variance of a single draw.
    pub sample_variance: f64,
    /// `sample_variance / r`.
    pub variance_of_mean: f64,
}

impl BatchEstimate {
    /// Textbook unbiased estimators from `r ≥ 2` values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let r = values.len();
        if r < 2 {
            return Err(Error::invalid(format!("batch variance needs at least 2 samples, got {r}")));
        }
        let mean = values.iter().sum::<f64>() / r as f64;
        let sample_variance = values.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        Ok(BatchEstimate { mean, sample_variance, variance_of_mean: sample_variance / r as f64 })
    }
}

/// Draws `r` replicates of `Y_ℓ(x)` and summarizes them.
pub fn batch_sample(
    family: &dyn SurfaceFamily,
    surface: usize,
    x: &[f64],
    r: usize,
    rng: &mut dyn RngCore,
) -> Result<BatchEstimate> {
    if r < 2 {
        return Err(Error::invalid(format!("batch size must be at least 2, got {r}")));
    }
    let values = (0..r).map(|_| family.sample(surface, x, rng)).collect::<Result<Vec<_>>>()?;
    BatchEstimate::from_values(&values)
}
