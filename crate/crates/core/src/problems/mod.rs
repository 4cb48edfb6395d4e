//! Stochastic simulators whose mean responses are to be ranked.

mod batch;
mod sir;
mod synth2d;
mod toy1d;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use batch::{batch_sample, BatchEstimate};
pub use sir::{sir_trajectory, Regime, SirDomain, SirParams, SirProblem, TrajectoryOutcome};
pub use synth2d::Synth2d;
pub use toy1d::{Toy1d, TOY1D_ROOTS};

/// Axis-aligned input box, optionally restricted to its integer lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub lattice: bool,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, lattice: bool) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("domain bounds must be nonempty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::invalid("domain needs finite bounds with lower <= upper"));
        }
        if lattice && lower.iter().chain(&upper).any(|v| v.fract() != 0.0) {
            return Err(Error::invalid("lattice domains need integer bounds"));
        }
        Ok(Domain { lower, upper, lattice })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| v >= l && v <= u)
            && (!self.lattice || x.iter().all(|v| v.fract() == 0.0))
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::invalid(format!("point {x:?} is outside the domain")))
        }
    }

    /// Coordinates rescaled to the unit cube.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, l), u)| if u > l { (v - l) / (u - l) } else { 0.0 })
            .collect()
    }
}

/// A family of L stochastic simulators `Y_ℓ(x)` sharing one input domain.
///
/// Implementations are stateless; all randomness comes from the caller's stream,
/// so one family can serve many concurrent runs.
pub trait SurfaceFamily: Send + Sync {
    fn surfaces(&self) -> usize;

    fn domain(&self) -> &Domain;

    /// Display labels for the surfaces, used in output files.
    fn surface_names(&self) -> Vec<String> {
        (1..=self.surfaces()).map(|i| i.to_string()).collect()
    }

    /// One draw of `Y_ℓ(x)`.
    fn sample(&self, surface: usize, x: &[f64], rng: &mut dyn RngCore) -> Result<f64>;

    /// Noise standard deviation `σ_ℓ(x)` when it is known.
    fn noise_sd(&self, _surface: usize, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Mean response `μ_ℓ(x)` when it is known.
    fn true_mean(&self, _surface: usize, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Whether [`SurfaceFamily::true_mean`] returns values.
    fn has_truth(&self) -> bool {
        false
    }

    /// Whether [`SurfaceFamily::noise_sd`] returns values.
    fn has_known_noise(&self) -> bool {
        false
    }
}

pub(crate) fn check_surface(surface: usize, count: usize) -> Result<()> {
    if surface < count {
        Ok(())
    } else {
        Err(Error::invalid(format!("surface index {surface} out of range (have {count})")))
    }
}
