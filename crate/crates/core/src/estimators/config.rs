use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inla::{InlaConfig, LaplaceConfig};

/// Point at which Chib-type identities are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrdinatePoint {
    #[default]
    Mean,
    /// Componentwise posterior median.
    Median,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChibConfig {
    pub ordinate: OrdinatePoint,
}

impl Default for ChibConfig {
    fn default() -> Self {
        Self {
            ordinate: OrdinatePoint::Mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonicConfig {
    pub n_batches: usize,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self { n_batches: 50 }
    }
}

/// Quadrature over the power-posterior ladder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderRule {
    #[default]
    Trapezoid,
    /// Trapezoid minus `Δt²/12 · (V_i − V_{i−1})`, where `V_t`, the variance
    /// of the log-likelihood at rung `t`, is the derivative of the integrand.
    CorrectedTrapezoid,
}

/// Power-posterior ladder `t_i = (i/n)^c`, `i = 0..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerPosteriorConfig {
    pub n_steps: usize,
    pub exponent: f64,
    pub samples_per_step: usize,
    pub burn_in_per_step: usize,
    pub rule: LadderRule,
}

impl Default for PowerPosteriorConfig {
    fn default() -> Self {
        Self {
            n_steps: 10,
            exponent: 5.0,
            samples_per_step: 20_000,
            burn_in_per_step: 1_000,
            rule: LadderRule::Trapezoid,
        }
    }
}

/// Annealing schedule `t_k = (k/K)^c`, `k = 0..=K`, with `sweeps_per_rung`
/// kernel sweeps at each intermediate rung.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AisConfig {
    pub n_temperatures: usize,
    pub n_particles: usize,
    pub exponent: f64,
    pub sweeps_per_rung: usize,
}

impl Default for AisConfig {
    fn default() -> Self {
        Self {
            n_temperatures: 100,
            n_particles: 2_000,
            exponent: 5.0,
            sweeps_per_rung: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NestedConfig {
    pub n_live: usize,
    /// Stop once `L_max · X` falls below this fraction of the running evidence.
    pub termination_ratio: f64,
    /// Random-walk steps per replacement.
    pub mcmc_steps: usize,
    pub max_iterations: usize,
}

impl Default for NestedConfig {
    fn default() -> Self {
        Self {
            n_live: 2_000,
            termination_ratio: 1e-8,
            mcmc_steps: 20,
            max_iterations: 5_000_000,
        }
    }
}

/// Tuning for every estimator; each method reads the parts it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Main-run sweeps for single-chain samplers.
    pub iterations: usize,
    pub burn_in: usize,
    pub replications: usize,
    pub seed: u64,
    pub harmonic: HarmonicConfig,
    pub chib: ChibConfig,
    pub power: PowerPosteriorConfig,
    pub ais: AisConfig,
    pub nested: NestedConfig,
    pub inla: InlaConfig,
    pub laplace: LaplaceConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            burn_in: 1_000,
            replications: 1,
            seed: 0,
            harmonic: HarmonicConfig::default(),
            chib: ChibConfig::default(),
            power: PowerPosteriorConfig::default(),
            ais: AisConfig::default(),
            nested: NestedConfig::default(),
            inla: InlaConfig::default(),
            laplace: LaplaceConfig::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("iterations", self.iterations),
            ("replications", self.replications),
            ("harmonic.n_batches", self.harmonic.n_batches),
            ("power.n_steps", self.power.n_steps),
            ("power.samples_per_step", self.power.samples_per_step),
            ("ais.n_temperatures", self.ais.n_temperatures),
            ("ais.n_particles", self.ais.n_particles),
            ("ais.sweeps_per_rung", self.ais.sweeps_per_rung),
            ("nested.n_live", self.nested.n_live),
            ("nested.mcmc_steps", self.nested.mcmc_steps),
            ("laplace.map_sweeps", self.laplace.map_sweeps),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        let r = self.nested.termination_ratio;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Config(format!(
                "nested.termination_ratio {r} outside (0, 1)"
            )));
        }
        for (name, c) in [
            ("power.exponent", self.power.exponent),
            ("ais.exponent", self.ais.exponent),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {c}")));
            }
        }
        self.inla.validate()
    }
}

/// Ladder `(i/n)^c` for `i = 0..=n`.
pub fn power_ladder(n: usize, exponent: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| (i as f64 / n as f64).powf(exponent))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EstimatorConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_counts_rejected() {
        let mut c = EstimatorConfig::default();
        c.ais.n_particles = 0;
        assert!(c.validate().is_err());
        let mut c = EstimatorConfig::default();
        c.nested.termination_ratio = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let c: EstimatorConfig =
            toml::from_str("iterations = 500\n[power]\nn_steps = 3\n").unwrap();
        assert_eq!(c.iterations, 500);
        assert_eq!(c.power.n_steps, 3);
        assert_eq!(c.power.samples_per_step, 20_000);
        assert_eq!(c.ais.n_particles, 2_000);
    }

    #[test]
    fn ladder_endpoints() {
        let l = power_ladder(10, 5.0);
        assert_eq!(l.len(), 11);
        assert_eq!(l[0], 0.0);
        assert_eq!(l[10], 1.0);
        assert!((l[5] - 0.5f64.powi(5)).abs() < 1e-15);
    }
}
