//! Chib's identity `log m(y) = log f(y|ψ*) + log π(ψ*) - log π̂(ψ*|y)` with
//! Rao–Blackwellized (Gibbs) or Metropolis–Hastings posterior ordinates.

use std::time::Instant;

use super::{EstimatorConfig, EstimatorId, EvidenceEstimate, OrdinatePoint};
use crate::error::{Error, Result};
use crate::model::kernels::binary_log_target;
use crate::model::{
    BinaryRegression, GaussLinReg, GaussLinRegGibbs, GaussLinRegState, ModelSpec, ModelTarget,
    ProbitGibbs, ProbitState,
};
use crate::numkit::dist::{gamma_ln_pdf, mvn_ln_pdf, mvn_ln_pdf_precision, std_normal};
use crate::numkit::stats::{log_mean_exp, log_mean_exp_se, mean, quantile, variance};
use crate::numkit::{RngStream, Vector};

const N_BATCHES: usize = 50;

/// Ordinate point from stored draws (rows are draws).
fn ordinate_point(draws: &[Vec<f64>], rule: OrdinatePoint) -> Vec<f64> {
    let p = draws[0].len();
    (0..p)
        .map(|k| {
            let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
            match rule {
                OrdinatePoint::Mean => mean(&col),
                OrdinatePoint::Median => quantile(&col, 0.5),
            }
        })
        .collect()
}

fn rule_name(rule: OrdinatePoint) -> &'static str {
    match rule {
        OrdinatePoint::Mean => "posterior-mean",
        OrdinatePoint::Median => "posterior-median",
    }
}

/// Chib's method for the Gaussian regression model.
///
/// The ordinate of β is averaged over the Normal full conditional at the
/// sampled τ; the ordinate of τ given β* is the exact Gamma conditional.
pub fn chib_evidence_gausslinreg(
    model: &GaussLinReg,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let gibbs = GaussLinRegGibbs::new(model, 1.0);
    let p = model.n_coef();
    let mut state = GaussLinRegState {
        beta: Vector::from_element(p, model.prior_mean),
        tau: 1.0 / variance(model.y.as_slice()).max(1e-12),
    };
    for _ in 0..cfg.burn_in {
        gibbs.step(&mut state, rng)?;
    }
    let mut draws = Vec::with_capacity(cfg.iterations);
    let mut taus = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        gibbs.step(&mut state, rng)?;
        let mut row: Vec<f64> = state.beta.iter().copied().collect();
        row.push(state.tau);
        draws.push(row);
        taus.push(state.tau);
    }
    let point = ordinate_point(&draws, cfg.chib.ordinate);
    let beta_star = Vector::from_column_slice(&point[..p]);
    let tau_star = point[p];

    let mut log_ord = Vec::with_capacity(taus.len());
    for &tau in &taus {
        let (m, chol) = gibbs.beta_conditional(tau)?;
        log_ord.push(mvn_ln_pdf_precision(&beta_star, &m, &chol));
    }
    let beta_ordinate = log_mean_exp(&log_ord)?;
    let (shape, rate) = gibbs.tau_conditional(&beta_star);
    let tau_ordinate = gamma_ln_pdf(tau_star, shape, rate);
    let joint =
        ModelSpec::GaussLinReg(model.clone()).log_joint(&[tau_star], beta_star.as_slice())?;
    let log_ml = joint - beta_ordinate - tau_ordinate;

    let mut est = EvidenceEstimate::new(EstimatorId::Chib, log_ml)
        .with_se(log_mean_exp_se(&log_ord, N_BATCHES))
        .with_iterations(cfg.iterations as u64)
        .with_diag("kernel", "gibbs-gausslinreg")
        .with_diag("ordinate_point", rule_name(cfg.chib.ordinate))
        .with_diag("log_ordinate_beta", beta_ordinate)
        .with_diag("log_ordinate_tau", tau_ordinate);
    est.wall_time = start.elapsed();
    est.validated()
}

/// Chib's method for probit regression with Albert–Chib augmentation.
///
/// `β | z` has a precision that does not depend on `z`, so each draw only
/// needs `Xᵀz` to evaluate the conditional density at β*.
pub fn chib_evidence_probit(
    model: &BinaryRegression,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let gibbs = ProbitGibbs::new(model)?;
    let p = model.n_coef();
    let mut state = ProbitState::new(model, Vector::from_element(p, model.prior_mean));
    for _ in 0..cfg.burn_in {
        gibbs.step(&mut state, rng);
    }
    let mut draws = Vec::with_capacity(cfg.iterations);
    let mut xtz = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        gibbs.step(&mut state, rng);
        draws.push(state.beta.iter().copied().collect::<Vec<_>>());
        xtz.push(model.x.tr_mul(&state.z));
    }
    let beta_star = Vector::from_vec(ordinate_point(&draws, cfg.chib.ordinate));
    let shift = Vector::from_element(p, model.prior_mean / model.prior_var);
    let log_ord: Vec<f64> = xtz
        .iter()
        .map(|v| {
            let m = gibbs.precision().solve(&(v + &shift));
            mvn_ln_pdf_precision(&beta_star, &m, gibbs.precision())
        })
        .collect();
    let ordinate = log_mean_exp(&log_ord)?;
    let log_post = binary_log_target(model, true, &beta_star, 1.0);
    let log_ml = log_post - ordinate;

    let mut est = EvidenceEstimate::new(EstimatorId::Chib, log_ml)
        .with_se(log_mean_exp_se(&log_ord, N_BATCHES))
        .with_iterations(cfg.iterations as u64)
        .with_diag("kernel", "gibbs-probit")
        .with_diag("ordinate_point", rule_name(cfg.chib.ordinate))
        .with_diag("log_ordinate", ordinate);
    est.wall_time = start.elapsed();
    est.validated()
}

/// Chib's identity dispatched on the model family.
pub fn chib_evidence(
    spec: &ModelSpec,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    match spec {
        ModelSpec::GaussLinReg(m) => chib_evidence_gausslinreg(m, cfg, rng),
        ModelSpec::ProbitReg(m) => chib_evidence_probit(m, cfg, rng),
        other => Err(Error::Unsupported {
            estimator: "chib",
            model: other.kind(),
        }),
    }
}

/// Chib–Jeliazkov estimator for random-walk Metropolis output on a binary
/// regression:
/// `π̂(β*|y) = mean_g[α(β_g, β*) q(β_g, β*)] / mean_j[α(β*, β_j)]`,
/// with `β_j ~ q(β*, ·)`.
pub fn chib_jeliazkov_evidence(
    spec: &ModelSpec,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let (model, probit) = match spec {
        ModelSpec::LogitReg(m) => (m, false),
        ModelSpec::ProbitReg(m) => (m, true),
        other => {
            return Err(Error::Unsupported {
                estimator: "chib-jeliazkov",
                model: other.kind(),
            })
        }
    };
    let start = Instant::now();
    let target = ModelTarget::new(spec)?;
    let proposal = target.rw_proposal(1.0)?;
    let log_post = |b: &Vector| binary_log_target(model, probit, b, 1.0);

    let mut x = target
        .mode_latent()
        .expect("binary models carry a mode")
        .clone();
    let mut lp = log_post(&x);
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(cfg.iterations);
    let mut lps = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.burn_in + cfg.iterations {
        let s = crate::model::rw_mh_step(log_post, &x, lp, &proposal, rng);
        x = s.state;
        lp = s.log_target;
        if it >= cfg.burn_in {
            accepted += s.accepted as usize;
            draws.push(x.iter().copied().collect::<Vec<_>>());
            lps.push(lp);
        }
    }
    let beta_star = Vector::from_vec(ordinate_point(&draws, cfg.chib.ordinate));
    let lp_star = log_post(&beta_star);

    let num: Vec<f64> = draws
        .iter()
        .zip(&lps)
        .map(|(d, &l)| {
            let b = Vector::from_column_slice(d);
            (lp_star - l).min(0.0)
                + mvn_ln_pdf(&beta_star, &b, &proposal).expect("dimensions match")
        })
        .collect();
    let den: Vec<f64> = (0..cfg.iterations)
        .map(|_| {
            let z = Vector::from_fn(beta_star.len(), |_, _| std_normal(rng));
            let cand = &beta_star + proposal.mul_lower(&z);
            (log_post(&cand) - lp_star).min(0.0)
        })
        .collect();
    let log_num = log_mean_exp(&num)?;
    let log_den = log_mean_exp(&den)?;
    if !log_den.is_finite() {
        return Err(Error::Estimator(format!(
            "chib-jeliazkov: every proposal from the ordinate point was rejected ({} draws)",
            den.len()
        )));
    }
    let ordinate = log_num - log_den;
    let se = (log_mean_exp_se(&num, N_BATCHES).powi(2) + log_mean_exp_se(&den, N_BATCHES).powi(2))
        .sqrt();
    let mut est = EvidenceEstimate::new(EstimatorId::ChibJeliazkov, lp_star - ordinate)
        .with_se(se)
        .with_iterations(cfg.iterations as u64)
        .with_diag("kernel", if probit { "rw-mh" } else { "rw-mh-logit" })
        .with_diag("ordinate_point", rule_name(cfg.chib.ordinate))
        .with_diag("acceptance_rate", accepted as f64 / cfg.iterations as f64)
        .with_diag("log_ordinate", ordinate);
    est.wall_time = start.elapsed();
    est.validated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;

    #[test]
    fn unsupported_models_rejected() {
        let spec = ModelSpec::ToyGaussian(crate::model::ToyGaussian::new(1.0, 1.0, 1.0).unwrap());
        let mut rng = RngStream::new(0, 0);
        let cfg = EstimatorConfig::default();
        assert!(matches!(
            chib_evidence(&spec, &cfg, &mut rng),
            Err(Error::Unsupported { .. })
        ));
        assert!(matches!(
            chib_jeliazkov_evidence(&spec, &cfg, &mut rng),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn ordinate_rules() {
        let draws = vec![vec![1.0], vec![2.0], vec![10.0]];
        assert_eq!(
            ordinate_point(&draws, OrdinatePoint::Mean),
            vec![13.0 / 3.0]
        );
        assert_eq!(ordinate_point(&draws, OrdinatePoint::Median), vec![2.0]);
    }

    #[test]
    fn probit_tiny_prior_tends_to_coin_flips() {
        // σβ² → 0 with μβ = 0 collapses β to 0, where each observation has
        // probability one half.
        let n = 40;
        let x = Matrix::from_fn(
            n,
            2,
            |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.3).cos() },
        );
        let y = Vector::from_fn(n, |i, _| (i % 2) as f64);
        let cfg = EstimatorConfig {
            iterations: 2000,
            burn_in: 100,
            ..EstimatorConfig::default()
        };
        let mut last = f64::NEG_INFINITY;
        for var in [1.0, 1e-2, 1e-6] {
            let m = BinaryRegression::new(y.clone(), x.clone(), 0.0, var).unwrap();
            let est = chib_evidence_probit(&m, &cfg, &mut RngStream::new(1, 0)).unwrap();
            assert!(est.log_ml > last);
            last = est.log_ml;
        }
        assert!((last - n as f64 * 0.5f64.ln()).abs() < 1e-3);
    }
}
