//! Deterministic evidence approximations.
//!
//! [`gaussian_approx`] fits a Gaussian to `p(η | y, θ)` at its mode and
//! [`log_evidence_given_theta`] turns it into `log p̃(y | θ)`.
//! [`inla_evidence`] integrates over θ by empirical Bayes or on a
//! standardized grid, and [`laplace_evidence`] applies the Laplace
//! approximation jointly over every parameter.

mod gaussian;
mod grid;
mod laplace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gaussian::{
    gaussian_approx, gaussian_approx_from, log_evidence_given_theta, GaussianApprox,
};
pub use grid::{find_theta_mode, inla_evidence, GridPoint, ThetaGrid, ThetaMode};
pub use laplace::laplace_evidence;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InlaStrategy {
    /// Plug in the θ mode with a Gaussian correction.
    Eb,
    #[default]
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InlaConfig {
    pub strategy: InlaStrategy,
    /// Grid step on the standardized scale.
    pub delta_z: f64,
    /// Largest log-density drop from the mode kept on the grid.
    pub pi_z: f64,
}

impl Default for InlaConfig {
    fn default() -> Self {
        Self {
            strategy: InlaStrategy::Grid,
            delta_z: 0.75,
            pi_z: 6.0,
        }
    }
}

impl InlaConfig {
    pub fn eb() -> Self {
        Self {
            strategy: InlaStrategy::Eb,
            ..Self::default()
        }
    }

    pub fn grid(delta_z: f64, pi_z: f64) -> Self {
        Self {
            strategy: InlaStrategy::Grid,
            delta_z,
            pi_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_z > 0.0 && self.delta_z.is_finite()) {
            return Err(Error::Config(format!(
                "inla.delta_z must be positive, got {}",
                self.delta_z
            )));
        }
        if !(self.pi_z > 0.0 && self.pi_z.is_finite()) {
            return Err(Error::Config(format!(
                "inla.pi_z must be positive, got {}",
                self.pi_z
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplaceCenter {
    #[default]
    PosteriorMode,
    /// Highest log-posterior draw of a short MCMC run.
    MapFromSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceConfig {
    pub center: LaplaceCenter,
    pub map_sweeps: usize,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        Self {
            center: LaplaceCenter::PosteriorMode,
            map_sweeps: 10_000,
        }
    }
}
