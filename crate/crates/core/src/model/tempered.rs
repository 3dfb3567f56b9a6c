//! Tempered targets `p(y|x)^t p(x)` for the thermodynamic and sampling-based
//! estimators.
//!
//! States are flat vectors on the natural scale of each model:
//!
//! | model | state |
//! |---|---|
//! | ToyGaussian | `[η]` |
//! | GaussLinReg | `[β…, τ]` with τ = σ⁻² |
//! | Probit/Logit | `[β…]` |
//! | PoissonGlmm | `[β₀..β₃, b…, W₁₁, W₂₁, W₂₂]` |

use super::kernels::{
    binary_log_lik, binary_log_target, rw_mh_step, GaussLinRegGibbs, GaussLinRegState, GlmmSampler,
    GlmmState, KernelKind,
};
use super::latent::LatentGaussianView;
use super::spec::{wishart_internal_from_precision, ModelSpec, GLMM_FIXED};
use crate::error::{Error, Result};
use crate::numkit::dist::{
    gamma_ln_pdf, gamma_sample, normal_ln_pdf_var, poisson_ln_pmf, std_normal, wishart_ln_pdf,
    wishart_sample,
};
use crate::numkit::linalg::weighted_gram;
use crate::numkit::{Cholesky, Matrix, RngStream, Vector};

/// A Markov kernel leaving one tempered target invariant.
pub trait TemperedKernel {
    fn step(&mut self, x: &mut [f64], rng: &mut RngStream) -> Result<()>;

    fn acceptance_rate(&self) -> Option<f64> {
        None
    }
}

pub trait TemperedTarget: Sync {
    fn dim(&self) -> usize;
    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64>;
    fn log_prior(&self, x: &[f64]) -> f64;
    fn log_likelihood(&self, x: &[f64]) -> f64;
    /// Kernel for `p(y|x)^temp p(x)`.
    fn kernel(&self, temp: f64) -> Result<Box<dyn TemperedKernel + '_>>;
    fn kernel_kind(&self, temp: f64) -> KernelKind;

    /// Starting point for chains targeting the posterior.
    fn initial_state(&self, rng: &mut RngStream) -> Vec<f64> {
        self.sample_prior(rng)
    }
}

/// Curvature summary at the joint posterior mode.
#[derive(Clone, Debug)]
struct ModeInfo {
    eta: Vector,
    theta: Vec<f64>,
    /// Prior precision of η at the modal θ.
    prior_precision: Matrix,
    /// Negative Hessian of the log-likelihood in η at the mode.
    curvature: Matrix,
}

/// [`TemperedTarget`] backed by a [`ModelSpec`].
pub struct ModelTarget<'a> {
    spec: &'a ModelSpec,
    mode: Option<ModeInfo>,
}

impl<'a> ModelTarget<'a> {
    pub fn new(spec: &'a ModelSpec) -> Result<Self> {
        let mode = match spec {
            ModelSpec::ProbitReg(_) | ModelSpec::LogitReg(_) | ModelSpec::PoissonGlmm(_) => {
                let view = LatentGaussianView::new(spec)?;
                let res = spec.posterior_mode()?;
                let d = view.latent_dim();
                let eta = Vector::from_column_slice(&res.x.as_slice()[..d]);
                let theta = &res.x.as_slice()[d..];
                let lin = view.linear_predictor(&eta);
                let terms = view.obs_terms(theta, &lin)?;
                Some(ModeInfo {
                    curvature: weighted_gram(&view.design, &(-&terms.d2)),
                    prior_precision: view.precision(theta)?,
                    theta: theta.to_vec(),
                    eta,
                })
            }
            _ => None,
        };
        Ok(Self { spec, mode })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    /// Latent posterior mode, when one was computed.
    pub fn mode_latent(&self) -> Option<&Vector> {
        self.mode.as_ref().map(|m| &m.eta)
    }

    /// Maps a state vector to the internal parameterization `ψ = (η, θ)`.
    pub fn to_internal(&self, x: &[f64]) -> Vec<f64> {
        match self.spec {
            ModelSpec::GaussLinReg(m) => {
                let mut v = x.to_vec();
                v[m.n_coef()] = x[m.n_coef()].ln();
                v
            }
            ModelSpec::PoissonGlmm(_) => {
                let s = GlmmState::from_flat(x);
                let mut v = x[..x.len() - 3].to_vec();
                v.extend_from_slice(&wishart_internal_from_precision(&s.w));
                v
            }
            _ => x.to_vec(),
        }
    }

    fn tempered_precision(&self, temp: f64) -> Matrix {
        let m = self
            .mode
            .as_ref()
            .expect("mode computed for sampled models");
        &m.prior_precision + &m.curvature * temp
    }

    /// Proposal factor `2.38²/d · (Q + t C)⁻¹` used by random-walk kernels.
    pub fn rw_proposal(&self, temp: f64) -> Result<Cholesky> {
        let h = self.tempered_precision(temp);
        let d = h.nrows() as f64;
        let cov = Cholesky::new(&h)?.inverse() * (2.38f64.powi(2) / d);
        Cholesky::new(&cov)
    }
}

struct ExactToy {
    mean: f64,
    sd: f64,
}

impl TemperedKernel for ExactToy {
    fn step(&mut self, x: &mut [f64], rng: &mut RngStream) -> Result<()> {
        x[0] = self.mean + self.sd * std_normal(rng);
        Ok(())
    }
}

struct GibbsKernel<'a> {
    gibbs: GaussLinRegGibbs<'a>,
}

impl TemperedKernel for GibbsKernel<'_> {
    fn step(&mut self, x: &mut [f64], rng: &mut RngStream) -> Result<()> {
        let p = x.len() - 1;
        let mut s = GaussLinRegState {
            beta: Vector::from_column_slice(&x[..p]),
            tau: x[p],
        };
        self.gibbs.step(&mut s, rng)?;
        x[..p].copy_from_slice(s.beta.as_slice());
        x[p] = s.tau;
        Ok(())
    }
}

struct RwKernel<'a> {
    target: &'a ModelTarget<'a>,
    temp: f64,
    proposal: Cholesky,
    accepted: u64,
    proposed: u64,
}

impl RwKernel<'_> {
    fn log_target(&self, x: &Vector) -> f64 {
        match self.target.spec {
            ModelSpec::ProbitReg(m) => binary_log_target(m, true, x, self.temp),
            ModelSpec::LogitReg(m) => binary_log_target(m, false, x, self.temp),
            _ => unreachable!("random-walk kernel only built for binary regressions"),
        }
    }
}

impl TemperedKernel for RwKernel<'_> {
    fn step(&mut self, x: &mut [f64], rng: &mut RngStream) -> Result<()> {
        let cur = Vector::from_column_slice(x);
        let lp = self.log_target(&cur);
        let s = rw_mh_step(|b| self.log_target(b), &cur, lp, &self.proposal, rng);
        self.proposed += 1;
        self.accepted += s.accepted as u64;
        x.copy_from_slice(s.state.as_slice());
        Ok(())
    }

    fn acceptance_rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

struct GlmmKernel<'a> {
    sampler: GlmmSampler<'a>,
}

impl TemperedKernel for GlmmKernel<'_> {
    fn step(&mut self, x: &mut [f64], rng: &mut RngStream) -> Result<()> {
        let mut s = GlmmState::from_flat(x);
        self.sampler.step(&mut s, rng)?;
        x.copy_from_slice(&s.to_flat());
        Ok(())
    }

    fn acceptance_rate(&self) -> Option<f64> {
        Some(self.sampler.acceptance_rate())
    }
}

impl TemperedTarget for ModelTarget<'_> {
    fn dim(&self) -> usize {
        match self.spec {
            ModelSpec::ToyGaussian(_) => 1,
            ModelSpec::GaussLinReg(m) => m.n_coef() + 1,
            ModelSpec::ProbitReg(m) | ModelSpec::LogitReg(m) => m.n_coef(),
            ModelSpec::PoissonGlmm(m) => m.n_latent() + 3,
        }
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        match self.spec {
            ModelSpec::ToyGaussian(m) => vec![m.sigma0 * std_normal(rng)],
            ModelSpec::GaussLinReg(m) => {
                let sd = m.prior_var.sqrt();
                let mut v: Vec<f64> = (0..m.n_coef())
                    .map(|_| m.prior_mean + sd * std_normal(rng))
                    .collect();
                v.push(gamma_sample(m.shape, m.rate, rng));
                v
            }
            ModelSpec::ProbitReg(m) | ModelSpec::LogitReg(m) => {
                let sd = m.prior_var.sqrt();
                (0..m.n_coef())
                    .map(|_| m.prior_mean + sd * std_normal(rng))
                    .collect()
            }
            ModelSpec::PoissonGlmm(m) => {
                let sd = m.beta_prior_var.sqrt();
                let beta = Vector::from_fn(GLMM_FIXED, |_, _| sd * std_normal(rng));
                let scale = Cholesky::new(&m.wishart_scale).expect("validated Wishart scale");
                let w = wishart_sample(m.wishart_df, &scale, rng);
                let cov = Cholesky::new(&w).expect("Wishart draw is SPD");
                let mut b = Vector::zeros(2 * m.n_subjects);
                for j in 0..m.n_subjects {
                    let z = Vector::from_fn(2, |_, _| std_normal(rng));
                    let bj = cov.solve_upper(&z);
                    b[2 * j] = bj[0];
                    b[2 * j + 1] = bj[1];
                }
                GlmmState { beta, b, w }.to_flat()
            }
        }
    }

    fn log_prior(&self, x: &[f64]) -> f64 {
        match self.spec {
            ModelSpec::ToyGaussian(m) => normal_ln_pdf_var(x[0], 0.0, m.sigma0 * m.sigma0),
            ModelSpec::GaussLinReg(m) => {
                let p = m.n_coef();
                if !(x[p] > 0.0) {
                    return f64::NEG_INFINITY;
                }
                x[..p]
                    .iter()
                    .map(|b| normal_ln_pdf_var(*b, m.prior_mean, m.prior_var))
                    .sum::<f64>()
                    + gamma_ln_pdf(x[p], m.shape, m.rate)
            }
            ModelSpec::ProbitReg(m) | ModelSpec::LogitReg(m) => x
                .iter()
                .map(|b| normal_ln_pdf_var(*b, m.prior_mean, m.prior_var))
                .sum(),
            ModelSpec::PoissonGlmm(m) => {
                let s = GlmmState::from_flat(x);
                let Ok(wc) = Cholesky::new(&s.w) else {
                    return f64::NEG_INFINITY;
                };
                let Ok(lw) = wishart_ln_pdf(&s.w, m.wishart_df, &m.wishart_scale) else {
                    return f64::NEG_INFINITY;
                };
                let mut lp = lw;
                lp += s
                    .beta
                    .iter()
                    .map(|v| normal_ln_pdf_var(*v, 0.0, m.beta_prior_var))
                    .sum::<f64>();
                let half_logdet = 0.5 * wc.log_det();
                for j in 0..m.n_subjects {
                    let (u, v) = (s.b[2 * j], s.b[2 * j + 1]);
                    let q = s.w[(0, 0)] * u * u + 2.0 * s.w[(1, 0)] * u * v + s.w[(1, 1)] * v * v;
                    lp += half_logdet - 0.5 * q - crate::numkit::special::LN_2PI;
                }
                lp
            }
        }
    }

    fn log_likelihood(&self, x: &[f64]) -> f64 {
        match self.spec {
            ModelSpec::ToyGaussian(m) => normal_ln_pdf_var(m.y, x[0], m.sigma1 * m.sigma1),
            ModelSpec::GaussLinReg(m) => {
                let p = m.n_coef();
                let tau = x[p];
                if !(tau > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let beta = Vector::from_column_slice(&x[..p]);
                let rss = (&m.y - &m.x * beta).norm_squared();
                let n = m.y.len() as f64;
                0.5 * n * (tau.ln() - crate::numkit::special::LN_2PI) - 0.5 * tau * rss
            }
            ModelSpec::ProbitReg(m) => binary_log_lik(m, true, &Vector::from_column_slice(x)),
            ModelSpec::LogitReg(m) => binary_log_lik(m, false, &Vector::from_column_slice(x)),
            ModelSpec::PoissonGlmm(m) => {
                let (beta, rest) = x.split_at(GLMM_FIXED);
                let b = &rest[..2 * m.n_subjects];
                (0..m.y.len())
                    .map(|t| poisson_ln_pmf(m.y[t], m.linear_predictor(t, beta, b)))
                    .sum()
            }
        }
    }

    fn kernel(&self, temp: f64) -> Result<Box<dyn TemperedKernel + '_>> {
        if !(0.0..=1.0).contains(&temp) {
            return Err(Error::invalid(
                "temperature",
                format!("{temp} outside [0, 1]"),
            ));
        }
        Ok(match self.spec {
            ModelSpec::ToyGaussian(m) => {
                let prec = 1.0 / (m.sigma0 * m.sigma0) + temp / (m.sigma1 * m.sigma1);
                Box::new(ExactToy {
                    mean: temp * m.y / (m.sigma1 * m.sigma1) / prec,
                    sd: prec.sqrt().recip(),
                })
            }
            ModelSpec::GaussLinReg(m) => Box::new(GibbsKernel {
                gibbs: GaussLinRegGibbs::new(m, temp),
            }),
            ModelSpec::ProbitReg(_) | ModelSpec::LogitReg(_) => Box::new(RwKernel {
                target: self,
                temp,
                proposal: self.rw_proposal(temp)?,
                accepted: 0,
                proposed: 0,
            }),
            ModelSpec::PoissonGlmm(m) => Box::new(GlmmKernel {
                sampler: GlmmSampler::new(m, temp, &self.tempered_precision(temp))?,
            }),
        })
    }

    fn initial_state(&self, rng: &mut RngStream) -> Vec<f64> {
        match (&self.mode, self.spec) {
            (Some(m), ModelSpec::PoissonGlmm(_)) => {
                let (w, _) = super::spec::wishart_precision_from_internal(&m.theta);
                let mut v: Vec<f64> = m.eta.iter().copied().collect();
                v.extend_from_slice(&[w[(0, 0)], w[(1, 0)], w[(1, 1)]]);
                v
            }
            (Some(m), _) => m.eta.iter().copied().collect(),
            (None, _) => self.sample_prior(rng),
        }
    }

    fn kernel_kind(&self, _temp: f64) -> KernelKind {
        match self.spec {
            ModelSpec::ToyGaussian(_) => KernelKind::Exact,
            ModelSpec::GaussLinReg(_) => KernelKind::GibbsGausslinreg,
            ModelSpec::ProbitReg(_) => KernelKind::RwMh,
            ModelSpec::LogitReg(_) => KernelKind::RwMhLogit,
            ModelSpec::PoissonGlmm(_) => KernelKind::MhWithinGibbsGlmm,
        }
    }
}
