use std::time::Instant;

use super::{EstimatorConfig, EstimatorId, EvidenceEstimate};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ModelTarget, TemperedTarget};
use crate::numkit::dist::std_normal;
use crate::numkit::stats::{log_mean_exp, log_sum_exp};
use crate::numkit::{Cholesky, Matrix, RngStream, Vector};

/// Replacement attempts (each `mcmc_steps` long) before giving up.
const MAX_RESTARTS: usize = 50;
/// Live-point covariance is refreshed this often (iterations).
const COV_REFRESH: usize = 100;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn live_covariance_factor(live: &[Vec<f64>]) -> Result<Cholesky> {
    let d = live[0].len();
    let n = live.len() as f64;
    let mut mu = vec![0.0; d];
    for x in live {
        for k in 0..d {
            mu[k] += x[k] / n;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    for x in live {
        for i in 0..d {
            let di = x[i] - mu[i];
            for j in 0..=i {
                cov[(i, j)] += di * (x[j] - mu[j]) / (n - 1.0).max(1.0);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let jitter = 1e-12 * (1.0 + cov.diagonal().amax());
    for i in 0..d {
        cov[(i, i)] += jitter;
    }
    Cholesky::new(&cov)
}

/// Classic nested sampling with `n_live` points and shrinkage
/// `log X_k = -k / n_live`. Evidence increments are trapezoids in `L`
/// over `[X_k, X_{k-1}]`; the run stops when `L_max · X_k` drops below
/// `termination_ratio` times the running evidence, and the live points
/// contribute `X_k · mean(L)`. Replacements run a random walk on the prior
/// restricted to `L ≥ L*`, started from a random surviving live point.
pub fn nested_sampling_evidence(
    spec: &ModelSpec,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    let target = ModelTarget::new(spec)?;
    nested_sampling_target(&target, cfg, rng)
}

pub fn nested_sampling_target(
    target: &dyn TemperedTarget,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let n = cfg.nested.n_live;
    let nf = n as f64;
    let mut live: Vec<Vec<f64>> = (0..n).map(|_| target.sample_prior(rng)).collect();
    let mut live_ll: Vec<f64> = live.iter().map(|x| target.log_likelihood(x)).collect();
    let log_ratio = cfg.nested.termination_ratio.ln();

    let mut log_z = f64::NEG_INFINITY;
    let mut info = 0.0;
    let mut prev_ll: Option<f64> = None;
    let mut step_scale = 1.0;
    let mut chol = live_covariance_factor(&live)?;
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let mut k = 0usize;
    loop {
        if k >= cfg.nested.max_iterations {
            return Err(Error::Estimator(format!(
                "nested sampling did not terminate within {} iterations",
                cfg.nested.max_iterations
            )));
        }
        k += 1;
        let worst = (0..n).fold(0, |w, i| if live_ll[i] < live_ll[w] { i } else { w });
        let ll_star = live_ll[worst];
        // X_{k-1} - X_k = X_{k-1} (1 - e^{-1/n})
        let log_dx = -((k - 1) as f64) / nf + (-(-1.0 / nf).exp_m1()).ln();
        let log_l_avg = match prev_ll {
            Some(p) => log_add(p, ll_star) - std::f64::consts::LN_2,
            None => ll_star,
        };
        let log_w = log_dx + log_l_avg;
        let new_z = log_add(log_z, log_w);
        info = if new_z == f64::NEG_INFINITY {
            0.0
        } else {
            (log_w - new_z).exp() * ll_star + (log_z - new_z).exp() * (info + log_z.max(-f64::MAX))
                - new_z
        };
        log_z = new_z;
        prev_ll = Some(ll_star);

        let log_x = -(k as f64) / nf;
        let ll_max = live_ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if ll_max + log_x < log_ratio + log_z {
            break;
        }

        if k.is_multiple_of(COV_REFRESH) {
            chol = live_covariance_factor(&live)?;
        }
        let mut replaced = false;
        for _ in 0..MAX_RESTARTS {
            let src = if n == 1 {
                worst
            } else {
                let r = (rng.uniform() * (n - 1) as f64) as usize;
                if r >= worst {
                    r + 1
                } else {
                    r
                }
            };
            let mut x = live[src].clone();
            let mut x_lp = target.log_prior(&x);
            let mut x_ll = live_ll[src];
            let mut acc = 0usize;
            for _ in 0..cfg.nested.mcmc_steps {
                let z = Vector::from_fn(x.len(), |_, _| std_normal(rng));
                let step = chol.mul_lower(&z) * step_scale;
                let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let c_lp = target.log_prior(&cand);
                proposed += 1;
                if c_lp.is_finite() && rng.uniform().ln() < c_lp - x_lp {
                    let c_ll = target.log_likelihood(&cand);
                    if c_ll >= ll_star {
                        x = cand;
                        x_lp = c_lp;
                        x_ll = c_ll;
                        acc += 1;
                        accepted += 1;
                    }
                }
            }
            let rej = cfg.nested.mcmc_steps - acc;
            if acc > rej {
                step_scale *= (1.0 / acc as f64).exp();
            } else if rej > 0 {
                step_scale /= (1.0 / rej as f64).exp();
            }
            if acc > 0 {
                live[worst] = x;
                live_ll[worst] = x_ll;
                replaced = true;
                break;
            }
        }
        if !replaced {
            return Err(Error::Estimator(format!(
                "nested sampling replacement stuck at iteration {k}: no move accepted in {} attempts of {} steps",
                MAX_RESTARTS, cfg.nested.mcmc_steps
            )));
        }
    }

    let log_x = -(k as f64) / nf;
    let remainder = log_x + log_mean_exp(&live_ll)?;
    let final_z = log_sum_exp(&[log_z, remainder])?;
    let mut est = EvidenceEstimate::new(EstimatorId::NestedSampling, final_z)
        .with_se((info.max(0.0) / nf).sqrt())
        .with_iterations(k as u64)
        .with_diag("n_live", n)
        .with_diag("mcmc_steps", cfg.nested.mcmc_steps)
        .with_diag("information", info)
        .with_diag("acceptance_rate", accepted as f64 / proposed.max(1) as f64)
        .with_diag("replacement", "rw-mh-constrained-prior");
    est.wall_time = start.elapsed();
    est.validated()
}
