//! Domain types: states, densities, jump maps, jump laws and intensities.

mod density;
mod intensity;
mod jump;
mod trajectory;

pub use density::{log_sum_exp, Density, GaussianDensity, GaussianMixture};
pub use intensity::{GaussianBump, IntensityModel, IntensityShape, TimeProfile};
pub use jump::{AffineJumpMap, CollisionJumpSpec, CollisionNormal, JumpLaw};
pub use trajectory::{
    estimate_moments, fit_gaussian_mixture, fit_quasi_gaussian, Moments, Origin, StateVector,
    Trajectory,
};
