use std::time::Instant;

use super::{EstimatorConfig, EstimatorId, EvidenceEstimate};
use crate::error::Result;
use crate::model::{ModelSpec, ModelTarget, TemperedTarget};
use crate::numkit::stats::{log_mean_exp, log_mean_exp_se};
use crate::numkit::RngStream;

/// Harmonic mean of likelihood values given their logs:
/// `-log mean exp(-ℓᵢ)`, with a batch-means standard error.
pub fn harmonic_mean_from_loglik(loglik: &[f64], n_batches: usize) -> Result<(f64, f64)> {
    let neg: Vec<f64> = loglik.iter().map(|v| -v).collect();
    let est = -log_mean_exp(&neg)?;
    Ok((est, log_mean_exp_se(&neg, n_batches)))
}

/// Harmonic mean estimator on posterior draws from the model's `t = 1` kernel.
pub fn harmonic_mean(
    spec: &ModelSpec,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    let target = ModelTarget::new(spec)?;
    harmonic_mean_target(&target, cfg, rng)
}

pub fn harmonic_mean_target(
    target: &dyn TemperedTarget,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let mut kernel = target.kernel(1.0)?;
    let mut x = target.initial_state(rng);
    for _ in 0..cfg.burn_in {
        kernel.step(&mut x, rng)?;
    }
    let mut loglik = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        kernel.step(&mut x, rng)?;
        loglik.push(target.log_likelihood(&x));
    }
    let (log_ml, se) = harmonic_mean_from_loglik(&loglik, cfg.harmonic.n_batches)?;
    let mut est = EvidenceEstimate::new(EstimatorId::HarmonicMean, log_ml)
        .with_se(se)
        .with_iterations(cfg.iterations as u64)
        .with_diag("kernel", target.kernel_kind(1.0).as_str())
        .with_diag("burn_in", cfg.burn_in);
    if let Some(a) = kernel.acceptance_rate() {
        est = est.with_diag("acceptance_rate", a);
    }
    est.wall_time = start.elapsed();
    est.validated()
}
