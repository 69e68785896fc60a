//! Exact Gaussian-process regression with an anisotropic squared-exponential kernel.

mod fit;
mod kernel;
mod model;

pub use fit::{
    fit, fit_with, from_log, log_marginal_likelihood, to_log, FitOptions, FitReport,
    FROZEN_LENGTHSCALE, LENGTHSCALE_BOUNDS, NOISE_BOUNDS_REL, SIGNAL_BOUNDS_REL,
};
pub use kernel::{kernel_eval, KernelParams};
pub use model::{Dataset, GpModel, JITTER_MAX, JITTER_START, VARIANCE_FLOOR};
