//! Geometric Marshall-Olkin bivariate Pareto distributions and their
//! absolutely continuous four-parameter form (G-BBBVPA).
//!
//! * [`dist`]: closed-form survival functions, densities, marginals and log-likelihood
//! * [`sampler`]: exact random-variate generation
//! * [`em`]: modified EM maximum-likelihood estimation
//! * [`bayes`]: slice-within-Gibbs posterior sampling
//! * [`experiments`]: replicated simulation studies and parametric bootstrap
//! * [`dataio`]: CSV ingestion, peak-over-threshold excesses, empirical survival, density grids
//! * [`cli`]: the command implementations behind the `gbbvpa` binary

pub mod bayes;
pub mod bivariate;
pub mod cli;
pub mod dataio;
pub mod dist;
pub mod em;
pub mod experiments;
pub mod error;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use bivariate::{partition, BivariateSample};
pub use dist::{LocationScale, ModelParams, Param, RegionTag};
pub use error::{Error, Result};
pub use rng::RngStream;
