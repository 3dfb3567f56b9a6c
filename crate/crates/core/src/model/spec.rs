use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::dist::{gamma_ln_pdf, normal_ln_pdf_var, poisson_ln_pmf, wishart_ln_pdf};
use crate::numkit::special::log_norm_cdf_pair;
use crate::numkit::{Matrix, Vector};

/// Y | η ~ N(η, σ1²), η ~ N(0, σ0²).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToyGaussian {
    pub y: f64,
    pub sigma0: f64,
    pub sigma1: f64,
}

/// Linear regression with independent N(μβ, σβ²) coefficient priors and a
/// Gamma(shape, rate) prior on the noise precision σ⁻².
#[derive(Clone, Debug)]
pub struct GaussLinReg {
    pub y: Vector,
    /// Design matrix; column 0 is the intercept.
    pub x: Matrix,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub shape: f64,
    pub rate: f64,
}

/// Binary regression (probit or logit link) with N(μβ, σβ²) coefficient priors.
#[derive(Clone, Debug)]
pub struct BinaryRegression {
    pub y: Vector,
    pub x: Matrix,
    pub prior_mean: f64,
    pub prior_var: f64,
}

/// Poisson log-linear mixed model for longitudinal counts:
///
/// log λ_jt = log τ_jt + β₀ + β₁x₁ + β₂x₂ + β₃x₁x₂ + b_j0 + b_j1 x₁,
/// β ~ N(0, βvar I), b_j ~ N₂(0, D), D⁻¹ ~ Wishart₂(df, scale).
#[derive(Clone, Debug)]
pub struct PoissonGlmm {
    pub y: Vector,
    pub period: Vector,
    pub treatment: Vector,
    pub log_offset: Vector,
    /// Zero-based subject index of every observation.
    pub subject: Vec<usize>,
    pub n_subjects: usize,
    pub beta_prior_var: f64,
    pub wishart_df: f64,
    pub wishart_scale: Matrix,
}

#[derive(Clone, Debug)]
pub enum ModelSpec {
    ToyGaussian(ToyGaussian),
    GaussLinReg(GaussLinReg),
    ProbitReg(BinaryRegression),
    LogitReg(BinaryRegression),
    PoissonGlmm(PoissonGlmm),
}

/// Number of fixed effects in [`PoissonGlmm`].
pub const GLMM_FIXED: usize = 4;

impl ToyGaussian {
    pub fn new(y: f64, sigma0: f64, sigma1: f64) -> Result<Self> {
        if !(sigma0 > 0.0) || !(sigma1 > 0.0) || !y.is_finite() {
            return Err(Error::invalid(
                "toy gaussian",
                "need sigma0 > 0, sigma1 > 0, finite y",
            ));
        }
        Ok(Self { y, sigma0, sigma1 })
    }
}

fn check_regression(y: &Vector, x: &Matrix, prior_var: f64, what: &'static str) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: x.nrows(),
            context: what,
        });
    }
    if x.ncols() == 0 {
        return Err(Error::invalid(what, "design matrix has no columns"));
    }
    if !(prior_var > 0.0) {
        return Err(Error::invalid(what, "prior variance must be positive"));
    }
    Ok(())
}

impl GaussLinReg {
    pub fn new(
        y: Vector,
        x: Matrix,
        prior_mean: f64,
        prior_var: f64,
        shape: f64,
        rate: f64,
    ) -> Result<Self> {
        check_regression(&y, &x, prior_var, "gaussian regression")?;
        if !(shape > 0.0) || !(rate > 0.0) {
            return Err(Error::invalid(
                "gaussian regression",
                "gamma shape and rate must be positive",
            ));
        }
        Ok(Self {
            y,
            x,
            prior_mean,
            prior_var,
            shape,
            rate,
        })
    }

    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }
}

impl BinaryRegression {
    pub fn new(y: Vector, x: Matrix, prior_mean: f64, prior_var: f64) -> Result<Self> {
        check_regression(&y, &x, prior_var, "binary regression")?;
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(
                "binary regression",
                "responses must be 0 or 1",
            ));
        }
        Ok(Self {
            y,
            x,
            prior_mean,
            prior_var,
        })
    }

    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }
}

impl PoissonGlmm {
    /// Builds the model from long-format columns. Subject labels may be any
    /// integers; they are renumbered in order of first appearance.
    pub fn new(
        y: Vector,
        period: Vector,
        treatment: Vector,
        offset: Vector,
        subject_labels: &[i64],
    ) -> Result<Self> {
        let n = y.len();
        if period.len() != n
            || treatment.len() != n
            || offset.len() != n
            || subject_labels.len() != n
        {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: subject_labels.len(),
                context: "glmm columns",
            });
        }
        if offset.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::invalid("poisson glmm", "offsets must be positive"));
        }
        let mut seen: Vec<i64> = Vec::new();
        let subject = subject_labels
            .iter()
            .map(|s| match seen.iter().position(|v| v == s) {
                Some(i) => i,
                None => {
                    seen.push(*s);
                    seen.len() - 1
                }
            })
            .collect();
        Ok(Self {
            y,
            period,
            treatment,
            log_offset: offset.map(f64::ln),
            subject,
            n_subjects: seen.len(),
            beta_prior_var: 100.0,
            wishart_df: 4.0,
            wishart_scale: Matrix::identity(2, 2),
        })
    }

    pub fn n_latent(&self) -> usize {
        GLMM_FIXED + 2 * self.n_subjects
    }

    /// Linear predictor for observation `t` given fixed and random effects.
    #[inline]
    pub fn linear_predictor(&self, t: usize, beta: &[f64], b: &[f64]) -> f64 {
        let x1 = self.period[t];
        let x2 = self.treatment[t];
        let j = self.subject[t];
        self.log_offset[t]
            + beta[0]
            + beta[1] * x1
            + beta[2] * x2
            + beta[3] * x1 * x2
            + b[2 * j]
            + b[2 * j + 1] * x1
    }
}

/// `θ = (log L₁₁, log L₂₂, L₂₁)` ↦ `W = L Lᵀ` and `log |∂W/∂θ|`.
pub fn wishart_precision_from_internal(theta: &[f64]) -> (Matrix, f64) {
    let l11 = theta[0].exp();
    let l22 = theta[1].exp();
    let l21 = theta[2];
    let w = Matrix::from_row_slice(
        2,
        2,
        &[l11 * l11, l11 * l21, l11 * l21, l21 * l21 + l22 * l22],
    );
    let log_jac = 4f64.ln() + 3.0 * theta[0] + 2.0 * theta[1];
    (w, log_jac)
}

/// Inverse of [`wishart_precision_from_internal`].
pub fn wishart_internal_from_precision(w: &Matrix) -> [f64; 3] {
    let l11 = w[(0, 0)].sqrt();
    let l21 = w[(1, 0)] / l11;
    let l22 = (w[(1, 1)] - l21 * l21).sqrt();
    [l11.ln(), l22.ln(), l21]
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::ToyGaussian(_) => "ToyGaussian",
            ModelSpec::GaussLinReg(_) => "GaussLinReg",
            ModelSpec::ProbitReg(_) => "ProbitReg",
            ModelSpec::LogitReg(_) => "LogitReg",
            ModelSpec::PoissonGlmm(_) => "PoissonGlmm",
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            ModelSpec::ToyGaussian(_) => 1,
            ModelSpec::GaussLinReg(m) => m.n_coef(),
            ModelSpec::ProbitReg(m) | ModelSpec::LogitReg(m) => m.n_coef(),
            ModelSpec::PoissonGlmm(m) => m.n_latent(),
        }
    }

    pub fn theta_dim(&self) -> usize {
        match self {
            ModelSpec::GaussLinReg(_) => 1,
            ModelSpec::PoissonGlmm(_) => 3,
            _ => 0,
        }
    }

    /// Dimension of the full internal-scale parameter vector `ψ = (η, θ)`.
    pub fn param_dim(&self) -> usize {
        self.latent_dim() + self.theta_dim()
    }

    fn check_dims(&self, theta: &[f64], eta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_dim(),
                actual: theta.len(),
                context: "hyperparameter vector",
            });
        }
        if eta.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: eta.len(),
                context: "latent vector",
            });
        }
        Ok(())
    }

    /// log p(y | η, θ) + log p(η | θ) + log p(θ) with θ on its original
    /// scale: the noise precision σ⁻² for [`GaussLinReg`], and the free
    /// entries `(W₁₁, W₂₁, W₂₂)` of the random-effect precision for
    /// [`PoissonGlmm`].
    pub fn log_joint(&self, theta: &[f64], eta: &[f64]) -> Result<f64> {
        self.check_dims(theta, eta)?;
        let v = match self {
            ModelSpec::ToyGaussian(m) => {
                normal_ln_pdf_var(m.y, eta[0], m.sigma1 * m.sigma1)
                    + normal_ln_pdf_var(eta[0], 0.0, m.sigma0 * m.sigma0)
            }
            ModelSpec::GaussLinReg(m) => {
                let tau = theta[0];
                if !(tau > 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                let beta = Vector::from_column_slice(eta);
                let fitted = &m.x * &beta;
                let ll: f64 =
                    m.y.iter()
                        .zip(fitted.iter())
                        .map(|(y, f)| normal_ln_pdf_var(*y, *f, 1.0 / tau))
                        .sum();
                let lp: f64 = eta
                    .iter()
                    .map(|b| normal_ln_pdf_var(*b, m.prior_mean, m.prior_var))
                    .sum();
                ll + lp + gamma_ln_pdf(tau, m.shape, m.rate)
            }
            ModelSpec::ProbitReg(m) | ModelSpec::LogitReg(m) => {
                let beta = Vector::from_column_slice(eta);
                let lin = &m.x * &beta;
                if lin.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("linear predictor"));
                }
                let probit = matches!(self, ModelSpec::ProbitReg(_));
                let ll: f64 =
                    m.y.iter()
                        .zip(lin.iter())
                        .map(|(y, l)| {
                            if probit {
                                probit_ll(*y, *l)
                            } else {
                                logit_ll(*y, *l)
                            }
                        })
                        .sum();
                let lp: f64 = eta
                    .iter()
                    .map(|b| normal_ln_pdf_var(*b, m.prior_mean, m.prior_var))
                    .sum();
                ll + lp
            }
            ModelSpec::PoissonGlmm(m) => {
                let w = Matrix::from_row_slice(2, 2, &[theta[0], theta[1], theta[1], theta[2]]);
                let Ok(wc) = crate::numkit::Cholesky::new(&w) else {
                    return Ok(f64::NEG_INFINITY);
                };
                glmm_log_joint(m, &w, wc.log_det(), eta)?
            }
        };
        if v.is_nan() {
            return Err(Error::NonFinite("log joint"));
        }
        Ok(v)
    }

    /// Maps internal hyperparameters to their original scale, returning the
    /// log-Jacobian of the transform.
    pub fn theta_to_original(&self, theta_internal: &[f64]) -> (Vec<f64>, f64) {
        match self {
            ModelSpec::GaussLinReg(_) => (vec![theta_internal[0].exp()], theta_internal[0]),
            ModelSpec::PoissonGlmm(_) => {
                let (w, lj) = wishart_precision_from_internal(theta_internal);
                (vec![w[(0, 0)], w[(1, 0)], w[(1, 1)]], lj)
            }
            _ => (Vec::new(), 0.0),
        }
    }

    /// Log joint density of the internal-scale vector `ψ = (η, θ)`,
    /// including the Jacobian of the hyperparameter transform.
    pub fn log_joint_internal(&self, psi: &[f64]) -> Result<f64> {
        let d = self.latent_dim();
        if psi.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim(),
                actual: psi.len(),
                context: "internal parameter vector",
            });
        }
        let (theta, lj) = self.theta_to_original(&psi[d..]);
        Ok(self.log_joint(&theta, &psi[..d])? + lj)
    }
}

fn glmm_log_joint(m: &PoissonGlmm, w: &Matrix, w_logdet: f64, eta: &[f64]) -> Result<f64> {
    let (beta, b) = eta.split_at(GLMM_FIXED);
    let mut ll = 0.0;
    for t in 0..m.y.len() {
        let lin = m.linear_predictor(t, beta, b);
        if !lin.is_finite() {
            return Err(Error::NonFinite("linear predictor"));
        }
        ll += poisson_ln_pmf(m.y[t], lin);
    }
    let lp_beta: f64 = beta
        .iter()
        .map(|v| normal_ln_pdf_var(*v, 0.0, m.beta_prior_var))
        .sum();
    let mut lp_b = 0.0;
    for j in 0..m.n_subjects {
        let (u, v) = (b[2 * j], b[2 * j + 1]);
        let q = w[(0, 0)] * u * u + 2.0 * w[(1, 0)] * u * v + w[(1, 1)] * v * v;
        lp_b += 0.5 * w_logdet - 0.5 * q - crate::numkit::special::LN_2PI;
    }
    Ok(ll + lp_beta + lp_b + wishart_ln_pdf(w, m.wishart_df, &m.wishart_scale)?)
}

#[inline]
pub(crate) fn probit_ll(y: f64, lin: f64) -> f64 {
    let (lo, hi) = log_norm_cdf_pair(lin);
    if y == 1.0 {
        lo
    } else {
        hi
    }
}

#[inline]
pub(crate) fn logit_ll(y: f64, lin: f64) -> f64 {
    // y·η - log(1 + e^η), evaluated without overflow.
    let softplus = if lin > 0.0 {
        lin + (-lin).exp().ln_1p()
    } else {
        lin.exp().ln_1p()
    };
    y * lin - softplus
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_log_joint_two_terms() {
        let m = ModelSpec::ToyGaussian(ToyGaussian::new(2.0, 0.1, 1.0).unwrap());
        let v = m.log_joint(&[], &[0.0]).unwrap();
        // log N(2;0,1) + log N(0;0,0.01)
        let want = (-2.0 - 0.918_938_533_204_672_8) + (-(0.1f64).ln() - 0.918_938_533_204_672_8);
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn gausslinreg_prior_term_at_mean() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 0.3, 1.0, -1.2, 1.0, 2.0]);
        let y = Vector::from_vec(vec![0.1, 0.2, -0.3]);
        let m = GaussLinReg::new(y.clone(), x, 0.0, 4.0, 1.0, 1.0).unwrap();
        let spec = ModelSpec::GaussLinReg(m);
        let total = spec.log_joint(&[1.0], &[0.0, 0.0]).unwrap();
        let lik: f64 = y.iter().map(|v| normal_ln_pdf_var(*v, 0.0, 1.0)).sum();
        let gamma = gamma_ln_pdf(1.0, 1.0, 1.0);
        let prior = 2.0 * normal_ln_pdf_var(0.0, 0.0, 4.0);
        assert!((total - lik - gamma - prior).abs() < 1e-12);
    }

    #[test]
    fn logit_at_zero_is_log_half_per_obs() {
        let n = 7;
        let x = Matrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = Vector::from_fn(n, |i, _| (i % 2) as f64);
        let m = BinaryRegression::new(y, x, 0.0, 100.0).unwrap();
        let spec = ModelSpec::LogitReg(m);
        let v = spec.log_joint(&[], &[0.0, 0.0]).unwrap();
        let prior = 2.0 * normal_ln_pdf_var(0.0, 0.0, 100.0);
        assert!((v - prior - n as f64 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = ModelSpec::ToyGaussian(ToyGaussian::new(0.0, 1.0, 1.0).unwrap());
        assert!(matches!(
            m.log_joint(&[], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn wishart_transform_round_trip() {
        let theta = [0.3, -0.7, 0.4];
        let (w, _) = wishart_precision_from_internal(&theta);
        let back = wishart_internal_from_precision(&w);
        for (a, b) in theta.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn logit_ll_is_stable() {
        assert!((logit_ll(1.0, 800.0)).abs() < 1e-300);
        assert!((logit_ll(0.0, -800.0)).abs() < 1e-300);
        assert!((logit_ll(0.0, 800.0) + 800.0).abs() < 1e-12);
    }
}
