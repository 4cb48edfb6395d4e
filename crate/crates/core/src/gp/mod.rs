//! Gaussian-process regression for a single response surface.

mod fit;
mod kernel;
mod model;
mod observations;
mod tracked;

pub use fit::{
    fit_hyperparameters, log_marginal_likelihood, min_observations, FitOptions, HyperBounds, HyperFit, TrendMode,
};
pub use kernel::{kernel_eval, KernelForm, KernelSpec};
pub use model::{KrigingModel, Posterior, JITTER_LEVELS};
pub use observations::ObservationSet;
pub use tracked::TrackedPosterior;

pub(crate) use model::hypothetical_variance;
