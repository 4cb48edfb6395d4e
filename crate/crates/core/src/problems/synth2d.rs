use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{check_surface, Domain, SurfaceFamily};
use crate::error::Result;

/// Five quadratic/sinusoidal surfaces on [−2, 2]² with noise sd 0.5.
#[derive(Debug, Clone)]
pub struct Synth2d {
    domain: Domain,
}

impl Default for Synth2d {
    fn default() -> Self {
        Synth2d { domain: Domain { lower: vec![-2.0; 2], upper: vec![2.0; 2], lattice: false } }
    }
}

impl Synth2d {
    pub const NOISE_SD: f64 = 0.5;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn mean(surface: usize, x: &[f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        match surface {
            0 => 2.0 - a * a - 0.5 * b * b,
            1 => 2.0 * (a - 1.0).powi(2) + 2.0 * b * b - 2.0,
            2 => 2.0 * (2.0 * a).sin() + 2.0,
            3 => 8.0 * (a - 1.0).powi(2) + 8.0 * b * b - 3.0,
            _ => 0.5 * (a + 3.0).powi(2) + 16.0 * b * b - 6.0,
        }
    }
}

impl SurfaceFamily for Synth2d {
    fn surfaces(&self) -> usize {
        5
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample(&self, surface: usize, x: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        check_surface(surface, 5)?;
        self.domain.check(x)?;
        let z: f64 = StandardNormal.sample(rng);
        Ok(Self::mean(surface, x) + Self::NOISE_SD * z)
    }

    fn noise_sd(&self, surface: usize, _x: &[f64]) -> Option<f64> {
        (surface < 5).then_some(Self::NOISE_SD)
    }

    fn has_truth(&self) -> bool {
        true
    }

    fn has_known_noise(&self) -> bool {
        true
    }

    fn true_mean(&self, surface: usize, x: &[f64]) -> Option<f64> {
        (surface < 5 && x.len() == 2).then(|| Self::mean(surface, x))
    }
}
