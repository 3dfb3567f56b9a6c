use std::time::Instant;

use super::{LaplaceCenter, LaplaceConfig};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorId, EvidenceEstimate};
use crate::model::{LatentGaussianView, ModelSpec, ModelTarget, TemperedTarget};
use crate::numkit::special::LN_2PI;
use crate::numkit::{Cholesky, RngStream};

/// Laplace approximation over every internal-scale parameter, centered at
/// the joint posterior mode or at the best draw of a short MCMC run.
pub fn laplace_evidence(
    spec: &ModelSpec,
    cfg: &LaplaceConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    let start = Instant::now();
    let view = LatentGaussianView::new(spec)?;
    let (center, iterations, label) = match cfg.center {
        LaplaceCenter::PosteriorMode => {
            let res = spec.posterior_mode()?;
            (
                res.x.iter().copied().collect::<Vec<_>>(),
                res.iterations as u64,
                "posterior-mode",
            )
        }
        LaplaceCenter::MapFromSample => {
            let target = ModelTarget::new(spec)?;
            let mut kernel = target.kernel(1.0)?;
            let mut x = target.initial_state(rng);
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for _ in 0..cfg.map_sweeps {
                kernel.step(&mut x, rng)?;
                let psi = target.to_internal(&x);
                let lp = spec.log_joint_internal(&psi)?;
                if lp > best.0 {
                    best = (lp, psi);
                }
            }
            (best.1, cfg.map_sweeps as u64, "map-from-sample")
        }
    };
    let (value, _, hess) = view.log_joint_derivs(&center)?;
    let k = center.len();
    let chol = Cholesky::new(&(-hess)).map_err(|e| {
        Error::ModeSearch(format!(
            "Hessian not negative definite at Laplace center: {e}"
        ))
    })?;
    let log_ml = value + 0.5 * k as f64 * LN_2PI - 0.5 * chol.log_det();
    let id = match cfg.center {
        LaplaceCenter::PosteriorMode => EstimatorId::Laplace,
        LaplaceCenter::MapFromSample => EstimatorId::LaplaceMap,
    };
    let mut est = EvidenceEstimate::new(id, log_ml)
        .with_iterations(iterations)
        .with_diag("center", label)
        .with_diag("log_joint_at_center", value);
    est.wall_time = start.elapsed();
    est.validated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ToyGaussian;

    #[test]
    fn toy_laplace_is_exact() {
        let spec = ModelSpec::ToyGaussian(ToyGaussian::new(2.0, 1000.0, 1.0).unwrap());
        let mut rng = RngStream::new(0, 0);
        let est = laplace_evidence(&spec, &LaplaceConfig::default(), &mut rng).unwrap();
        let exact = -0.5 * (LN_2PI + (1e6f64 + 1.0).ln()) - 2.0 / (1e6 + 1.0);
        assert!((est.log_ml - exact).abs() < 1e-10);
        assert!((est.log_ml - -7.8267).abs() < 5e-5);
    }

    #[test]
    fn map_center_no_better_than_mode() {
        let spec = ModelSpec::ToyGaussian(ToyGaussian::new(1.0, 2.0, 1.0).unwrap());
        let mut rng = RngStream::new(0, 0);
        let cfg = LaplaceConfig {
            center: LaplaceCenter::MapFromSample,
            map_sweeps: 500,
        };
        let map = laplace_evidence(&spec, &cfg, &mut rng).unwrap();
        let mode = laplace_evidence(&spec, &LaplaceConfig::default(), &mut rng).unwrap();
        assert_eq!(map.estimator, EstimatorId::LaplaceMap);
        // Gaussian target: the Hessian is constant so the MAP variant only
        // loses the small gap between the best draw and the mode.
        assert!(map.log_ml <= mode.log_ml + 1e-12);
        assert!(mode.log_ml - map.log_ml < 0.01);
    }
}
