//! Rate-distortion-leakage tradeoff for two interconnected areas sharing
//! noisy measurements of each other's Gaussian state.
//!
//! * [`gauss`]: small multivariate Gaussian toolkit (conditioning, mutual
//!   information, sampling, plug-in estimation)
//! * [`model`]: the two-area measurement model and its closed-form bounds
//! * [`tradeoff`]: rates, leakages and test-channel calibration per direction
//! * [`sim`]: seeded Monte Carlo of the exchange
//! * [`cli`]: the `rdl` command-line front end

pub mod cli;
pub mod error;
pub mod gauss;
pub mod model;
pub mod sim;
pub mod tradeoff;

pub use error::{RdlError, Result};
pub use gauss::{GaussianSpec, SampleMatrix};
pub use model::{derive, DerivedQuantities, SystemParams};
pub use sim::{SimConfig, SimReport};
pub use tradeoff::{tradeoff, DistortionRequest, Regime, TradeoffPoint};
