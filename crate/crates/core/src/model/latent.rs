//! Decomposition of a model into hyperparameters θ, a Gaussian latent field
//! η with precision Q(θ), and observation terms that depend on η only
//! through a linear predictor.

use super::spec::{logit_ll, probit_ll, wishart_precision_from_internal, ModelSpec, GLMM_FIXED};
use crate::error::{Error, Result};
use crate::numkit::dist::{gamma_ln_pdf, wishart_ln_pdf};
use crate::numkit::special::{inv_mills, ln_gamma, LN_2PI};
use crate::numkit::{Cholesky, Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// Gaussian observations with known precision.
    GaussianFixed {
        precision: f64,
    },
    /// Gaussian observations whose log precision is θ₀.
    GaussianLogPrecision,
    Probit,
    Logit,
    Poisson,
}

#[derive(Clone, Debug)]
enum Hyper {
    /// θ is empty or only enters the likelihood; Q is constant.
    Fixed { precision: Matrix, chol: Cholesky },
    /// Gamma(shape, rate) prior on the observation precision e^θ₀.
    GammaPrecision {
        shape: f64,
        rate: f64,
        precision: Matrix,
        chol: Cholesky,
    },
    /// Fixed-effect block with constant precision followed by `groups`
    /// bivariate random effects sharing the precision `W(θ)`,
    /// `W ~ Wishart₂(df, scale)`.
    Wishart {
        df: f64,
        scale: Matrix,
        fixed_precision: Matrix,
        fixed_logdet: f64,
        groups: usize,
    },
}

/// Observation-level contributions: total log-likelihood plus its first
/// and second derivatives in each linear predictor.
#[derive(Clone, Debug)]
pub struct ObsTerms {
    pub log_lik: f64,
    pub d1: Vector,
    pub d2: Vector,
}

#[derive(Clone, Debug)]
pub struct LatentGaussianView {
    pub family: Family,
    pub y: Vector,
    /// Maps the latent field to linear predictors (n × d).
    pub design: Matrix,
    pub offset: Vector,
    pub prior_mean: Vector,
    hyper: Hyper,
    /// Σ log y! for Poisson data, zero otherwise.
    lik_const: f64,
}

impl LatentGaussianView {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::ToyGaussian(m) => {
                let precision = Matrix::from_element(1, 1, 1.0 / (m.sigma0 * m.sigma0));
                Ok(Self {
                    family: Family::GaussianFixed {
                        precision: 1.0 / (m.sigma1 * m.sigma1),
                    },
                    y: Vector::from_element(1, m.y),
                    design: Matrix::from_element(1, 1, 1.0),
                    offset: Vector::zeros(1),
                    prior_mean: Vector::zeros(1),
                    hyper: Hyper::Fixed {
                        chol: Cholesky::new(&precision)?,
                        precision,
                    },
                    lik_const: 0.0,
                })
            }
            ModelSpec::GaussLinReg(m) => {
                let d = m.n_coef();
                let precision = Matrix::identity(d, d) / m.prior_var;
                Ok(Self {
                    family: Family::GaussianLogPrecision,
                    y: m.y.clone(),
                    design: m.x.clone(),
                    offset: Vector::zeros(m.y.len()),
                    prior_mean: Vector::from_element(d, m.prior_mean),
                    hyper: Hyper::GammaPrecision {
                        shape: m.shape,
                        rate: m.rate,
                        chol: Cholesky::new(&precision)?,
                        precision,
                    },
                    lik_const: 0.0,
                })
            }
            ModelSpec::ProbitReg(m) | ModelSpec::LogitReg(m) => {
                let d = m.n_coef();
                let precision = Matrix::identity(d, d) / m.prior_var;
                Ok(Self {
                    family: if matches!(spec, ModelSpec::ProbitReg(_)) {
                        Family::Probit
                    } else {
                        Family::Logit
                    },
                    y: m.y.clone(),
                    design: m.x.clone(),
                    offset: Vector::zeros(m.y.len()),
                    prior_mean: Vector::from_element(d, m.prior_mean),
                    hyper: Hyper::Fixed {
                        chol: Cholesky::new(&precision)?,
                        precision,
                    },
                    lik_const: 0.0,
                })
            }
            ModelSpec::PoissonGlmm(m) => {
                let n = m.y.len();
                let d = m.n_latent();
                let mut design = Matrix::zeros(n, d);
                for t in 0..n {
                    let (x1, x2) = (m.period[t], m.treatment[t]);
                    design[(t, 0)] = 1.0;
                    design[(t, 1)] = x1;
                    design[(t, 2)] = x2;
                    design[(t, 3)] = x1 * x2;
                    let j = m.subject[t];
                    design[(t, GLMM_FIXED + 2 * j)] = 1.0;
                    design[(t, GLMM_FIXED + 2 * j + 1)] = x1;
                }
                let fixed_precision = Matrix::identity(GLMM_FIXED, GLMM_FIXED) / m.beta_prior_var;
                Ok(Self {
                    family: Family::Poisson,
                    y: m.y.clone(),
                    design,
                    offset: m.log_offset.clone(),
                    prior_mean: Vector::zeros(d),
                    hyper: Hyper::Wishart {
                        df: m.wishart_df,
                        scale: m.wishart_scale.clone(),
                        fixed_logdet: -(GLMM_FIXED as f64) * m.beta_prior_var.ln(),
                        fixed_precision,
                        groups: m.n_subjects,
                    },
                    lik_const: m.y.iter().map(|k| ln_gamma(k + 1.0)).sum(),
                })
            }
        }
    }

    pub fn theta_dim(&self) -> usize {
        match self.hyper {
            Hyper::Fixed { .. } => 0,
            Hyper::GammaPrecision { .. } => 1,
            Hyper::Wishart { .. } => 3,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_dim(),
                actual: theta.len(),
                context: "hyperparameter vector",
            });
        }
        Ok(())
    }

    pub(crate) fn gamma_hyper(&self) -> Option<(f64, f64)> {
        match self.hyper {
            Hyper::GammaPrecision { shape, rate, .. } => Some((shape, rate)),
            _ => None,
        }
    }

    /// `(df, scale⁻¹, fixed block size, groups)` for the Wishart hyperprior.
    pub(crate) fn wishart_hyper(&self) -> Option<(f64, Matrix, usize, usize)> {
        match &self.hyper {
            Hyper::Wishart {
                df,
                scale,
                fixed_precision,
                groups,
                ..
            } => {
                let inv = scale.clone().try_inverse()?;
                Some((*df, inv, fixed_precision.nrows(), *groups))
            }
            _ => None,
        }
    }

    /// Latent prior precision Q(θ).
    pub fn precision(&self, theta: &[f64]) -> Result<Matrix> {
        self.check_theta(theta)?;
        Ok(match &self.hyper {
            Hyper::Fixed { precision, .. } | Hyper::GammaPrecision { precision, .. } => {
                precision.clone()
            }
            Hyper::Wishart {
                fixed_precision,
                groups,
                ..
            } => {
                let (w, _) = wishart_precision_from_internal(theta);
                let k = fixed_precision.nrows();
                let d = k + 2 * groups;
                let mut q = Matrix::zeros(d, d);
                q.view_mut((0, 0), (k, k)).copy_from(fixed_precision);
                for g in 0..*groups {
                    q.view_mut((k + 2 * g, k + 2 * g), (2, 2)).copy_from(&w);
                }
                q
            }
        })
    }

    /// log |Q(θ)|, using the block structure when available.
    pub fn precision_logdet(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match &self.hyper {
            Hyper::Fixed { chol, .. } | Hyper::GammaPrecision { chol, .. } => chol.log_det(),
            Hyper::Wishart {
                fixed_logdet,
                groups,
                ..
            } => {
                // log |W| = 2 (log L₁₁ + log L₂₂)
                fixed_logdet + *groups as f64 * 2.0 * (theta[0] + theta[1])
            }
        })
    }

    /// log p(θ) on the internal scale, Jacobian included.
    pub fn log_hyperprior(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match &self.hyper {
            Hyper::Fixed { .. } => 0.0,
            Hyper::GammaPrecision { shape, rate, .. } => {
                gamma_ln_pdf(theta[0].exp(), *shape, *rate) + theta[0]
            }
            Hyper::Wishart { df, scale, .. } => {
                let (w, log_jac) = wishart_precision_from_internal(theta);
                wishart_ln_pdf(&w, *df, scale)? + log_jac
            }
        })
    }

    /// log N(η; m, Q(θ)⁻¹).
    pub fn latent_log_prior(&self, theta: &[f64], eta: &Vector) -> Result<f64> {
        let q = self.precision(theta)?;
        let diff = eta - &self.prior_mean;
        let quad = diff.dot(&(&q * &diff));
        Ok(0.5 * self.precision_logdet(theta)?
            - 0.5 * quad
            - 0.5 * self.latent_dim() as f64 * LN_2PI)
    }

    pub fn linear_predictor(&self, eta: &Vector) -> Vector {
        &self.offset + &self.design * eta
    }

    /// Observation log-likelihood and its derivatives in the linear predictor.
    pub fn obs_terms(&self, theta: &[f64], lin: &Vector) -> Result<ObsTerms> {
        self.check_theta(theta)?;
        let n = self.n_obs();
        let mut d1 = Vector::zeros(n);
        let mut d2 = Vector::zeros(n);
        let mut ll = -self.lik_const;
        for t in 0..n {
            let (l, a, b) = obs_term(self.family, theta, self.y[t], lin[t]);
            ll += l;
            d1[t] = a;
            d2[t] = b;
        }
        if !ll.is_finite() {
            return Err(Error::NonFinite("observation log-likelihood"));
        }
        Ok(ObsTerms {
            log_lik: ll,
            d1,
            d2,
        })
    }

    pub fn log_likelihood(&self, theta: &[f64], eta: &Vector) -> Result<f64> {
        let lin = self.linear_predictor(eta);
        let mut ll = -self.lik_const;
        for t in 0..self.n_obs() {
            ll += obs_log_lik(self.family, theta, self.y[t], lin[t]);
        }
        Ok(ll)
    }
}

#[inline]
pub(crate) fn obs_log_lik(family: Family, theta: &[f64], y: f64, lin: f64) -> f64 {
    match family {
        Family::GaussianFixed { precision } => {
            let r = y - lin;
            0.5 * (precision.ln() - LN_2PI) - 0.5 * precision * r * r
        }
        Family::GaussianLogPrecision => {
            let r = y - lin;
            0.5 * (theta[0] - LN_2PI) - 0.5 * theta[0].exp() * r * r
        }
        Family::Probit => probit_ll(y, lin),
        Family::Logit => logit_ll(y, lin),
        // Σ log y! is added once by the caller.
        Family::Poisson => y * lin - lin.exp(),
    }
}

/// `(ℓ, ∂ℓ/∂lin, ∂²ℓ/∂lin²)` for one observation.
#[inline]
pub(crate) fn obs_term(family: Family, theta: &[f64], y: f64, lin: f64) -> (f64, f64, f64) {
    match family {
        Family::GaussianFixed { precision } => {
            let r = y - lin;
            (
                0.5 * (precision.ln() - LN_2PI) - 0.5 * precision * r * r,
                precision * r,
                -precision,
            )
        }
        Family::GaussianLogPrecision => {
            let tau = theta[0].exp();
            let r = y - lin;
            (0.5 * (theta[0] - LN_2PI) - 0.5 * tau * r * r, tau * r, -tau)
        }
        Family::Probit => {
            // Work with s = ±lin so the relevant tail is always Φ(s).
            let (s, sign) = if y == 1.0 { (lin, 1.0) } else { (-lin, -1.0) };
            let r = inv_mills(s);
            (probit_ll(y, lin), sign * r, -r * (s + r))
        }
        Family::Logit => {
            let p = 1.0 / (1.0 + (-lin).exp());
            (logit_ll(y, lin), y - p, -p * (1.0 - p))
        }
        Family::Poisson => {
            let mu = lin.exp();
            (y * lin - mu, y - mu, -mu)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spec::*;

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let (fp, f0, fm) = (f(x + h), f(x), f(x - h));
        ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn obs_term_derivatives_match_finite_differences() {
        let mut rng = crate::numkit::RngStream::new(21, 0);
        let families = [
            Family::GaussianFixed { precision: 2.5 },
            Family::GaussianLogPrecision,
            Family::Probit,
            Family::Logit,
            Family::Poisson,
        ];
        for fam in families {
            for k in 0..20 {
                let lin = 6.0 * (rng.uniform() - 0.5);
                let theta = [0.4];
                let y = match fam {
                    Family::Probit | Family::Logit => (k % 2) as f64,
                    Family::Poisson => (k % 5) as f64,
                    _ => 1.3,
                };
                let (_, d1, d2) = obs_term(fam, &theta, y, lin);
                let (g, h) = central(|l| obs_term(fam, &theta, y, l).0, lin, 1e-4);
                assert!(rel_err(d1, g) < 1e-5, "{fam:?} d1 {d1} vs {g}");
                assert!(rel_err(d2, h) < 1e-5, "{fam:?} d2 {d2} vs {h}");
            }
        }
    }

    #[test]
    fn probit_tail_derivatives_finite() {
        let (l, d1, d2) = obs_term(Family::Probit, &[], 1.0, -40.0);
        assert!(l.is_finite() && d1.is_finite() && d2.is_finite());
        assert!(d1 > 39.0 && d2 < 0.0);
    }

    #[test]
    fn toy_view_shapes() {
        let spec = ModelSpec::ToyGaussian(ToyGaussian::new(2.0, 0.5, 1.0).unwrap());
        let v = LatentGaussianView::new(&spec).unwrap();
        assert_eq!(v.theta_dim(), 0);
        assert_eq!(v.latent_dim(), 1);
        assert!((v.precision(&[]).unwrap()[(0, 0)] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn gausslinreg_view_shapes() {
        let n = 20;
        let x = Matrix::from_fn(n, 9, |i, j| if j == 0 { 1.0 } else { ((i * j) % 7) as f64 });
        let spec = ModelSpec::GaussLinReg(
            GaussLinReg::new(Vector::zeros(n), x, 0.0, 1.0, 1.0, 1.0).unwrap(),
        );
        let v = LatentGaussianView::new(&spec).unwrap();
        assert_eq!(v.latent_dim(), 9);
        assert_eq!(v.theta_dim(), 1);
    }

    fn small_glmm() -> ModelSpec {
        let subjects: Vec<i64> = (0..6).flat_map(|j| std::iter::repeat_n(j, 5)).collect();
        let n = subjects.len();
        let period = Vector::from_fn(n, |i, _| if i % 5 == 0 { 0.0 } else { 1.0 });
        let trt = Vector::from_fn(n, |i, _| if i >= 15 { 1.0 } else { 0.0 });
        let offset = Vector::from_fn(n, |i, _| if i % 5 == 0 { 8.0 } else { 2.0 });
        let y = Vector::from_fn(n, |i, _| ((i * 7) % 11) as f64);
        ModelSpec::PoissonGlmm(PoissonGlmm::new(y, period, trt, offset, &subjects).unwrap())
    }

    #[test]
    fn glmm_precision_block_structure_and_logdet() {
        let spec = small_glmm();
        let v = LatentGaussianView::new(&spec).unwrap();
        assert_eq!(v.latent_dim(), 4 + 12);
        assert_eq!(v.theta_dim(), 3);
        let theta = [0.2, -0.3, 0.5];
        let q = v.precision(&theta).unwrap();
        let (_, ld) = crate::numkit::chol_logdet(&q).unwrap();
        assert!((ld - v.precision_logdet(&theta).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn glmm_precision_spd_for_prior_draws() {
        let spec = small_glmm();
        let v = LatentGaussianView::new(&spec).unwrap();
        let mut rng = crate::numkit::RngStream::new(5, 5);
        let chol_scale = Cholesky::new(&Matrix::identity(2, 2)).unwrap();
        for _ in 0..100 {
            let w = crate::numkit::dist::wishart_sample(4.0, &chol_scale, &mut rng);
            let theta = wishart_internal_from_precision(&w);
            let q = v.precision(&theta).unwrap();
            assert!(Cholesky::new(&q).is_ok());
        }
    }

    #[test]
    fn view_reproduces_log_joint() {
        let spec = small_glmm();
        let v = LatentGaussianView::new(&spec).unwrap();
        let theta = [0.1, 0.2, -0.3];
        let eta = Vector::from_fn(16, |i, _| 0.05 * i as f64 - 0.3);
        let via_view = v.log_likelihood(&theta, &eta).unwrap()
            + v.latent_log_prior(&theta, &eta).unwrap()
            + v.log_hyperprior(&theta).unwrap();
        let mut psi: Vec<f64> = eta.iter().copied().collect();
        psi.extend_from_slice(&theta);
        let direct = spec.log_joint_internal(&psi).unwrap();
        assert!((via_view - direct).abs() < 1e-9, "{via_view} vs {direct}");
    }
}
