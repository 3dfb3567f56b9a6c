//! Estimators built on tempered posteriors `p(y|x)^t p(x)`: power
//! posteriors (thermodynamic integration) and annealed importance sampling.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{power_ladder, LadderRule};
use super::{EstimatorConfig, EstimatorId, EvidenceEstimate};
use crate::error::Result;
use crate::model::{ModelSpec, ModelTarget, TemperedKernel, TemperedTarget};
use crate::numkit::stats::{batch_means_se, log_mean_exp, mean, sd, variance};
use crate::numkit::RngStream;

const N_BATCHES: usize = 50;
/// Particles handled by one worker task in AIS.
const AIS_CHUNK: usize = 64;

struct Rung {
    mean: f64,
    var: f64,
    se: f64,
    acceptance: Option<f64>,
}

fn run_rung(
    target: &dyn TemperedTarget,
    temp: f64,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<Rung> {
    let n = cfg.power.samples_per_step;
    let mut ll = Vec::with_capacity(n);
    if temp == 0.0 {
        for _ in 0..n {
            let x = target.sample_prior(rng);
            ll.push(target.log_likelihood(&x));
        }
        return Ok(Rung {
            mean: mean(&ll),
            var: variance(&ll),
            se: sd(&ll) / (n as f64).sqrt(),
            acceptance: None,
        });
    }
    let mut kernel = target.kernel(temp)?;
    let mut x = target.initial_state(rng);
    for _ in 0..cfg.power.burn_in_per_step {
        kernel.step(&mut x, rng)?;
    }
    for _ in 0..n {
        kernel.step(&mut x, rng)?;
        ll.push(target.log_likelihood(&x));
    }
    Ok(Rung {
        mean: mean(&ll),
        var: variance(&ll),
        se: batch_means_se(&ll, N_BATCHES),
        acceptance: kernel.acceptance_rate(),
    })
}

/// Thermodynamic integration of `E_t[log p(y|x)]` over the ladder
/// `t_i = (i/n)^c` with the trapezoidal rule (optionally with its
/// derivative correction). Rung `i` uses substream `i`.
pub fn power_posterior_evidence(
    spec: &ModelSpec,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    let target = ModelTarget::new(spec)?;
    power_posterior_target(&target, cfg, rng)
}

pub fn power_posterior_target(
    target: &dyn TemperedTarget,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let ladder = power_ladder(cfg.power.n_steps, cfg.power.exponent);
    let base = rng.clone();
    let rungs: Vec<Rung> = ladder
        .par_iter()
        .enumerate()
        .map(|(i, &t)| run_rung(target, t, cfg, &mut base.substream(i as u64)))
        .collect::<Result<_>>()?;

    let mut log_ml = 0.0;
    let mut weights = vec![0.0; ladder.len()];
    for i in 1..ladder.len() {
        let dt = ladder[i] - ladder[i - 1];
        log_ml += 0.5 * dt * (rungs[i].mean + rungs[i - 1].mean);
        weights[i] += 0.5 * dt;
        weights[i - 1] += 0.5 * dt;
        if cfg.power.rule == LadderRule::CorrectedTrapezoid {
            log_ml -= dt * dt / 12.0 * (rungs[i].var - rungs[i - 1].var);
        }
    }
    let se = weights
        .iter()
        .zip(&rungs)
        .map(|(w, r)| (w * r.se).powi(2))
        .sum::<f64>()
        .sqrt();

    let mut est = EvidenceEstimate::new(EstimatorId::PowerPosterior, log_ml)
        .with_se(se)
        .with_iterations(
            ((cfg.power.samples_per_step + cfg.power.burn_in_per_step) * ladder.len()) as u64,
        )
        .with_diag("kernel", target.kernel_kind(1.0).as_str())
        .with_diag("exponent", cfg.power.exponent)
        .with_diag("n_steps", cfg.power.n_steps)
        .with_diag(
            "rule",
            match cfg.power.rule {
                LadderRule::Trapezoid => "trapezoid",
                LadderRule::CorrectedTrapezoid => "corrected-trapezoid",
            },
        );
    for (i, (t, r)) in ladder.iter().zip(&rungs).enumerate() {
        est = est
            .with_diag(&format!("rung_{i:02}_t"), *t)
            .with_diag(&format!("rung_{i:02}_mean_loglik"), r.mean);
        if let Some(a) = r.acceptance {
            est = est.with_diag(&format!("rung_{i:02}_acceptance"), a);
        }
    }
    est.wall_time = start.elapsed();
    est.validated()
}

/// Annealed importance sampling from the prior to the posterior along
/// `t_k = (k/K)^c`. Particle `i` uses substream `i`, so results do not
/// depend on how particles are spread over threads.
pub fn ais_evidence(
    spec: &ModelSpec,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    let target = ModelTarget::new(spec)?;
    ais_target(&target, cfg, rng)
}

pub fn ais_target(
    target: &dyn TemperedTarget,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let ladder = power_ladder(cfg.ais.n_temperatures, cfg.ais.exponent);
    let n = cfg.ais.n_particles;
    let base = rng.clone();
    let chunks: Vec<(usize, usize)> = (0..n)
        .step_by(AIS_CHUNK)
        .map(|s| (s, (s + AIS_CHUNK).min(n)))
        .collect();

    let results: Vec<(Vec<f64>, f64, u64)> = chunks
        .par_iter()
        .map(|&(lo, hi)| -> Result<(Vec<f64>, f64, u64)> {
            // Kernels for the intermediate rungs t_1 .. t_{K-1}.
            let mut kernels: Vec<Box<dyn TemperedKernel + '_>> = ladder[1..ladder.len() - 1]
                .iter()
                .map(|&t| target.kernel(t))
                .collect::<Result<_>>()?;
            let mut log_w = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let mut r = base.substream(i as u64);
                let mut x = target.sample_prior(&mut r);
                let mut lw = 0.0;
                for k in 1..ladder.len() {
                    lw += (ladder[k] - ladder[k - 1]) * target.log_likelihood(&x);
                    if k < ladder.len() - 1 {
                        for _ in 0..cfg.ais.sweeps_per_rung {
                            kernels[k - 1].step(&mut x, &mut r)?;
                        }
                    }
                }
                log_w.push(lw);
            }
            let rates: Vec<f64> = kernels.iter().filter_map(|k| k.acceptance_rate()).collect();
            Ok((log_w, rates.iter().sum(), rates.len() as u64))
        })
        .collect::<Result<_>>()?;

    let mut log_w = Vec::with_capacity(n);
    let mut acc_sum = 0.0;
    let mut acc_count = 0u64;
    for (w, a, c) in results {
        log_w.extend(w);
        acc_sum += a;
        acc_count += c;
    }
    let log_ml = log_mean_exp(&log_w)?;
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let ess = sw * sw / sw2;
    let se = sd(&w) / (mean(&w) * (n as f64).sqrt());

    let mut est = EvidenceEstimate::new(EstimatorId::Ais, log_ml)
        .with_se(se)
        .with_iterations((n * cfg.ais.n_temperatures * cfg.ais.sweeps_per_rung) as u64)
        .with_diag("kernel", target.kernel_kind(1.0).as_str())
        .with_diag("ess", ess)
        .with_diag("n_particles", n)
        .with_diag("n_temperatures", cfg.ais.n_temperatures)
        .with_diag("exponent", cfg.ais.exponent)
        .with_diag("sweeps_per_rung", cfg.ais.sweeps_per_rung);
    if ess < 10.0 {
        est = est.with_diag("warning", "effective sample size below 10");
    }
    if acc_count > 0 {
        est = est.with_diag("mean_acceptance", acc_sum / acc_count as f64);
    }
    est.wall_time = start.elapsed();
    est.validated()
}
