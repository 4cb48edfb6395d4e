use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{check_surface, Domain, SurfaceFamily};
use crate::error::Result;

/// Where the two toy responses cross on [0, 1].
pub const TOY1D_ROOTS: [f64; 2] = [0.3193, 0.9279];

/// Two surfaces on [0, 1]: a wiggly curve with noise sd 0.2 against the
/// constant 0.5 with noise sd 0.1.
#[derive(Debug, Clone)]
pub struct Toy1d {
    domain: Domain,
}

impl Default for Toy1d {
    fn default() -> Self {
        Toy1d { domain: Domain { lower: vec![0.0], upper: vec![1.0], lattice: false } }
    }
}

impl Toy1d {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mean(surface: usize, x: f64) -> f64 {
        match surface {
            0 => 0.625 * ((10.0 * x).sin() / (1.0 + x) + 2.0 * x.powi(3) * (5.0 * x).cos() + 0.841),
            _ => 0.5,
        }
    }

    pub fn sd(surface: usize) -> f64 {
        if surface == 0 {
            0.2
        } else {
            0.1
        }
    }
}

impl SurfaceFamily for Toy1d {
    fn surfaces(&self) -> usize {
        2
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample(&self, surface: usize, x: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        check_surface(surface, 2)?;
        self.domain.check(x)?;
        let z: f64 = StandardNormal.sample(rng);
        Ok(Self::mean(surface, x[0]) + Self::sd(surface) * z)
    }

    fn noise_sd(&self, surface: usize, _x: &[f64]) -> Option<f64> {
        (surface < 2).then(|| Self::sd(surface))
    }

    fn has_truth(&self) -> bool {
        true
    }

    fn has_known_noise(&self) -> bool {
        true
    }

    fn true_mean(&self, surface: usize, x: &[f64]) -> Option<f64> {
        (surface < 2 && x.len() == 1).then(|| Self::mean(surface, x[0]))
    }
}
