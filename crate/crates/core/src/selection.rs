//! Bayes factors, posterior model probabilities and the model-space
//! Metropolis–Hastings acceptance probability.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkit::stats::log_sum_exp;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelPosteriors {
    pub probabilities: Vec<f64>,
    /// `log_bayes_factors[i][j] = log m_i(y) − log m_j(y)`.
    pub log_bayes_factors: Vec<Vec<f64>>,
}

/// `p(M_i | y) ∝ m_i(y) p(M_i)`, normalized in log space. Priors need not
/// sum to one.
pub fn model_posteriors(log_ml: &[f64], priors: &[f64]) -> Result<ModelPosteriors> {
    if log_ml.len() != priors.len() {
        return Err(Error::DimensionMismatch {
            expected: log_ml.len(),
            actual: priors.len(),
            context: "model prior probabilities",
        });
    }
    if log_ml.is_empty() {
        return Err(Error::Empty("model list"));
    }
    if priors.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::invalid(
            "model prior",
            "prior probabilities must be positive",
        ));
    }
    if log_ml.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log marginal likelihood"));
    }
    let log_post: Vec<f64> = log_ml.iter().zip(priors).map(|(l, p)| l + p.ln()).collect();
    let norm = log_sum_exp(&log_post)?;
    Ok(ModelPosteriors {
        probabilities: log_post.iter().map(|v| (v - norm).exp()).collect(),
        log_bayes_factors: log_ml
            .iter()
            .map(|a| log_ml.iter().map(|b| a - b).collect())
            .collect(),
    })
}

/// `min{1, m(y|M') p(M') q(M|M') / (m(y|M) p(M) q(M'|M))}` from log inputs.
pub fn mh_model_acceptance(
    log_ml_cur: f64,
    log_ml_prop: f64,
    log_prior_cur: f64,
    log_prior_prop: f64,
    log_q_fwd: f64,
    log_q_rev: f64,
) -> f64 {
    let log_rho = log_ml_prop + log_prior_prop + log_q_rev - log_ml_cur - log_prior_cur - log_q_fwd;
    if log_rho >= 0.0 {
        1.0
    } else {
        log_rho.exp()
    }
}
