//! Monte Carlo evidence estimators and a dispatcher over every method.

mod chib;
mod config;
mod estimate;
mod harmonic;
mod nested;
mod thermo;

use std::time::Instant;

pub use chib::{
    chib_evidence, chib_evidence_gausslinreg, chib_evidence_probit, chib_jeliazkov_evidence,
};
pub use config::{
    power_ladder, AisConfig, ChibConfig, EstimatorConfig, HarmonicConfig, LadderRule, NestedConfig,
    OrdinatePoint, PowerPosteriorConfig,
};
pub use estimate::{Diagnostic, EstimatorId, EvidenceEstimate};
pub use harmonic::{harmonic_mean, harmonic_mean_from_loglik, harmonic_mean_target};
pub use nested::{nested_sampling_evidence, nested_sampling_target};
pub use thermo::{ais_evidence, ais_target, power_posterior_evidence, power_posterior_target};

use crate::error::{Error, Result};
use crate::inla::{inla_evidence, laplace_evidence, LaplaceCenter, LaplaceConfig};
use crate::model::{LatentGaussianView, ModelSpec};
use crate::numkit::RngStream;
use crate::oracles;

/// Runs estimator `id` on `spec`.
pub fn evaluate(
    spec: &ModelSpec,
    id: EstimatorId,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    match id {
        EstimatorId::Exact | EstimatorId::Quadrature => {
            let start = Instant::now();
            let r = match (id, spec) {
                (EstimatorId::Exact, ModelSpec::ToyGaussian(m)) => {
                    oracles::toy_exact(m.y, m.sigma0, m.sigma1)?
                }
                (EstimatorId::Quadrature, ModelSpec::GaussLinReg(m)) => {
                    oracles::gausslinreg_quadrature(m, 128)?
                }
                (EstimatorId::Quadrature, ModelSpec::ProbitReg(_) | ModelSpec::LogitReg(_)) => {
                    let nodes = match spec.latent_dim() {
                        1 => 2049,
                        2 => 513,
                        _ => 129,
                    };
                    oracles::glm_quadrature(spec, nodes)?
                }
                _ => {
                    return Err(Error::Unsupported {
                        estimator: id.as_str(),
                        model: spec.kind(),
                    })
                }
            };
            let mut est =
                EvidenceEstimate::new(id, r.log_ml).with_diag("error_bound", r.error_bound);
            est.wall_time = start.elapsed();
            Ok(est)
        }
        EstimatorId::Inla => inla_evidence(&LatentGaussianView::new(spec)?, &cfg.inla),
        EstimatorId::Laplace => laplace_evidence(
            spec,
            &LaplaceConfig {
                center: LaplaceCenter::PosteriorMode,
                ..cfg.laplace.clone()
            },
            rng,
        ),
        EstimatorId::LaplaceMap => laplace_evidence(
            spec,
            &LaplaceConfig {
                center: LaplaceCenter::MapFromSample,
                ..cfg.laplace.clone()
            },
            rng,
        ),
        EstimatorId::HarmonicMean => harmonic_mean(spec, cfg, rng),
        EstimatorId::Chib => chib_evidence(spec, cfg, rng),
        EstimatorId::ChibJeliazkov => chib_jeliazkov_evidence(spec, cfg, rng),
        EstimatorId::PowerPosterior => power_posterior_evidence(spec, cfg, rng),
        EstimatorId::Ais => ais_evidence(spec, cfg, rng),
        EstimatorId::NestedSampling => nested_sampling_evidence(spec, cfg, rng),
    }
}
