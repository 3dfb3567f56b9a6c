//! Bayesian marginal likelihood (model evidence) for latent Gaussian and
//! regression models.
//!
//! Five model families ([`model::ModelSpec`]) can be scored by deterministic
//! approximations ([`inla`]: Laplace, Laplace-MAP and a nested Laplace
//! approximation integrated over hyperparameters) and by Monte Carlo
//! estimators ([`estimators`]: harmonic mean, Chib, Chib–Jeliazkov, power
//! posteriors, annealed importance sampling, nested sampling). [`oracles`]
//! holds closed-form and quadrature references for small instances, and
//! [`suite`] runs scenario files and renders comparison tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimators;
pub mod inla;
pub mod model;
pub mod numkit;
pub mod oracles;
pub mod selection;
pub mod suite;

pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, EvidenceEstimate};
pub use model::{LatentGaussianView, ModelSpec};
pub use numkit::{Matrix, RngStream, Vector};
