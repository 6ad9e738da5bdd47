//! Response of stochastic dynamical systems to finite, instantaneous jumps.
//!
//! The crate estimates how ensemble averages react when the state of an SDE
//! `dx = f(x) dt + G(x) dW` is kicked by `x -> x + h(x, z)`, either once at a
//! fixed time or repeatedly at the random times of a state-dependent
//! intensity. Estimates come from time correlations along a single
//! unperturbed trajectory; analytic Ornstein–Uhlenbeck results and ensemble
//! Monte Carlo serve as ground truth.
//!
//! * [`model`]: densities, jump maps and laws, intensities, trajectories
//! * [`sde`]: Euler–Maruyama and exact-OU simulation, thinning
//! * [`integrals`]: the jump integrals `J` and `J_g`
//! * [`estimators`]: response estimators, autocorrelation, `T_corr`
//! * [`oracle`]: closed-form OU results
//! * [`ensemble`]: perturbed-minus-unperturbed Monte Carlo
//! * [`io`], [`cli`]: files, configuration and the command line

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod integrals;
pub mod io;
pub mod model;
pub mod oracle;
pub mod sde;

pub use error::{Error, Result};
