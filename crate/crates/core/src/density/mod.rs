//! Input priors, output-density estimation, and the likelihood-ratio weight.

pub mod gmm;
pub mod kde;
pub mod prior;
pub mod weight;

pub use gmm::{fit_gmm, GmmComponent, GmmFit, GmmSurrogate, COVARIANCE_FLOOR};
pub use kde::{kde_on_grid, silverman_bandwidth, OutputDensity, DENSITY_FLOOR_REL, GRID_POINTS};
pub use prior::InputPrior;
pub use weight::{
    estimate_output_density, likelihood_ratio, refresh_weight, LikelihoodWeight, WeightConfig,
};
