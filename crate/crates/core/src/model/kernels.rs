//! Transition kernels: exact-conditional Gibbs updates, random-walk
//! Metropolis, and the Metropolis-within-Gibbs sampler for the GLMM.
//!
//! Every kernel takes a temperature `t` and targets `p(y|·)^t p(·)`; `t = 1`
//! is the posterior.

use serde::Serialize;

use super::spec::{logit_ll, probit_ll, BinaryRegression, GaussLinReg, PoissonGlmm, GLMM_FIXED};
use crate::error::{Error, Result};
use crate::numkit::dist::{
    gamma_sample, mvn_sample_precision, normal_ln_pdf_var, poisson_ln_pmf, std_normal,
    truncated_std_normal, wishart_sample,
};
use crate::numkit::{Cholesky, Matrix, RngStream, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Exact,
    GibbsGausslinreg,
    GibbsProbit,
    RwMhLogit,
    RwMh,
    MhWithinGibbsGlmm,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Exact => "exact",
            KernelKind::GibbsGausslinreg => "gibbs-gausslinreg",
            KernelKind::GibbsProbit => "gibbs-probit",
            KernelKind::RwMhLogit => "rw-mh-logit",
            KernelKind::RwMh => "rw-mh",
            KernelKind::MhWithinGibbsGlmm => "mh-within-gibbs-glmm",
        }
    }
}

/// Kernel descriptor recorded alongside estimates.
#[derive(Clone, Debug, Serialize)]
pub struct TransitionKernel {
    pub kind: KernelKind,
    /// Multiplier applied to the curvature-based proposal covariance.
    pub proposal_scale: f64,
    pub blocks: usize,
}

// ---------------------------------------------------------------------------
// Gaussian linear regression

#[derive(Clone, Debug, PartialEq)]
pub struct GaussLinRegState {
    pub beta: Vector,
    /// Noise precision σ⁻².
    pub tau: f64,
}

/// Two-block Gibbs sampler for the conjugate regression model.
#[derive(Clone, Debug)]
pub struct GaussLinRegGibbs<'a> {
    model: &'a GaussLinReg,
    xtx: Matrix,
    xty: Vector,
    temp: f64,
}

impl<'a> GaussLinRegGibbs<'a> {
    pub fn new(model: &'a GaussLinReg, temp: f64) -> Self {
        Self {
            xtx: model.x.tr_mul(&model.x),
            xty: model.x.tr_mul(&model.y),
            model,
            temp,
        }
    }

    /// Mean and precision factor of β | τ, y.
    pub fn beta_conditional(&self, tau: f64) -> Result<(Vector, Cholesky)> {
        let p = self.model.n_coef();
        let st = self.temp * tau;
        let prec = &self.xtx * st + Matrix::identity(p, p) / self.model.prior_var;
        let chol = Cholesky::new(&prec)?;
        let rhs =
            &self.xty * st + Vector::from_element(p, self.model.prior_mean / self.model.prior_var);
        Ok((chol.solve(&rhs), chol))
    }

    /// Shape and rate of τ | β, y.
    pub fn tau_conditional(&self, beta: &Vector) -> (f64, f64) {
        let rss = (&self.model.y - &self.model.x * beta).norm_squared();
        let n = self.model.y.len() as f64;
        (
            self.model.shape + 0.5 * self.temp * n,
            self.model.rate + 0.5 * self.temp * rss,
        )
    }

    pub fn step(&self, state: &mut GaussLinRegState, rng: &mut RngStream) -> Result<()> {
        let (mean, chol) = self.beta_conditional(state.tau)?;
        state.beta = mvn_sample_precision(&mean, &chol, rng);
        let (shape, rate) = self.tau_conditional(&state.beta);
        state.tau = gamma_sample(shape, rate, rng);
        Ok(())
    }
}

/// One sweep of the Gibbs sampler: β | σ² then σ⁻² | β.
pub fn gibbs_step_gausslinreg(
    model: &GaussLinReg,
    state: &GaussLinRegState,
    rng: &mut RngStream,
) -> Result<GaussLinRegState> {
    let mut next = state.clone();
    GaussLinRegGibbs::new(model, 1.0).step(&mut next, rng)?;
    Ok(next)
}

// ---------------------------------------------------------------------------
// Probit regression (Albert–Chib)

#[derive(Clone, Debug, PartialEq)]
pub struct ProbitState {
    pub beta: Vector,
    pub z: Vector,
}

impl ProbitState {
    /// Latent utilities consistent with `y` at the given coefficients.
    pub fn new(model: &BinaryRegression, beta: Vector) -> Self {
        let z = Vector::from_fn(
            model.y.len(),
            |t, _| if model.y[t] > 0.5 { 0.5 } else { -0.5 },
        );
        Self { beta, z }
    }
}

#[derive(Clone, Debug)]
pub struct ProbitGibbs<'a> {
    model: &'a BinaryRegression,
    precision: Cholesky,
    prior_shift: Vector,
}

impl<'a> ProbitGibbs<'a> {
    pub fn new(model: &'a BinaryRegression) -> Result<Self> {
        let p = model.n_coef();
        let prec = model.x.tr_mul(&model.x) + Matrix::identity(p, p) / model.prior_var;
        Ok(Self {
            model,
            precision: Cholesky::new(&prec)?,
            prior_shift: Vector::from_element(p, model.prior_mean / model.prior_var),
        })
    }

    /// Precision factor of β | z (independent of z).
    pub fn precision(&self) -> &Cholesky {
        &self.precision
    }

    /// Mean of β | z.
    pub fn beta_mean(&self, z: &Vector) -> Vector {
        self.precision
            .solve(&(self.model.x.tr_mul(z) + &self.prior_shift))
    }

    pub fn step(&self, state: &mut ProbitState, rng: &mut RngStream) {
        let lin = &self.model.x * &state.beta;
        for t in 0..lin.len() {
            let mu = lin[t];
            state.z[t] = if self.model.y[t] > 0.5 {
                mu + truncated_std_normal(-mu, f64::INFINITY, rng)
            } else {
                mu + truncated_std_normal(f64::NEG_INFINITY, -mu, rng)
            };
        }
        let mean = self.beta_mean(&state.z);
        state.beta = mvn_sample_precision(&mean, &self.precision, rng);
    }
}

/// One Albert–Chib sweep: z | β then β | z.
pub fn gibbs_step_probit(
    model: &BinaryRegression,
    state: &ProbitState,
    rng: &mut RngStream,
) -> Result<ProbitState> {
    let mut next = state.clone();
    ProbitGibbs::new(model)?.step(&mut next, rng);
    Ok(next)
}

// ---------------------------------------------------------------------------
// Random-walk Metropolis

/// Outcome of one random-walk Metropolis step.
#[derive(Clone, Debug)]
pub struct MhStep {
    pub state: Vector,
    pub log_target: f64,
    pub accepted: bool,
    /// log of the acceptance probability, at most 0.
    pub log_alpha: f64,
}

/// Gaussian random-walk Metropolis step with proposal covariance `L Lᵀ`.
pub fn rw_mh_step<F>(
    mut log_target: F,
    x: &Vector,
    current: f64,
    proposal: &Cholesky,
    rng: &mut RngStream,
) -> MhStep
where
    F: FnMut(&Vector) -> f64,
{
    let z = Vector::from_fn(x.len(), |_, _| std_normal(rng));
    let cand = x + proposal.mul_lower(&z);
    let lp = log_target(&cand);
    let log_alpha = if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        (lp - current).min(0.0)
    };
    if rng.uniform().ln() < log_alpha {
        MhStep {
            state: cand,
            log_target: lp,
            accepted: true,
            log_alpha,
        }
    } else {
        MhStep {
            state: x.clone(),
            log_target: current,
            accepted: false,
            log_alpha,
        }
    }
}

/// log p(y|β)^t + log p(β) for a binary regression.
pub fn binary_log_target(model: &BinaryRegression, probit: bool, beta: &Vector, temp: f64) -> f64 {
    let lp: f64 = beta
        .iter()
        .map(|b| normal_ln_pdf_var(*b, model.prior_mean, model.prior_var))
        .sum();
    if temp == 0.0 {
        return lp;
    }
    temp * binary_log_lik(model, probit, beta) + lp
}

pub fn binary_log_lik(model: &BinaryRegression, probit: bool, beta: &Vector) -> f64 {
    let lin = &model.x * beta;
    model
        .y
        .iter()
        .zip(lin.iter())
        .map(|(y, l)| {
            if probit {
                probit_ll(*y, *l)
            } else {
                logit_ll(*y, *l)
            }
        })
        .sum()
}

/// Random-walk step on the logistic-regression posterior.
pub fn rw_mh_step_logit(
    model: &BinaryRegression,
    beta: &Vector,
    proposal: &Cholesky,
    rng: &mut RngStream,
) -> (Vector, bool, f64) {
    let current = binary_log_target(model, false, beta, 1.0);
    let s = rw_mh_step(
        |b| binary_log_target(model, false, b, 1.0),
        beta,
        current,
        proposal,
        rng,
    );
    (s.state, s.accepted, s.log_alpha)
}

// ---------------------------------------------------------------------------
// Poisson GLMM

#[derive(Clone, Debug, PartialEq)]
pub struct GlmmState {
    pub beta: Vector,
    /// Random effects, two per subject.
    pub b: Vector,
    /// Random-effect precision D⁻¹.
    pub w: Matrix,
}

impl GlmmState {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.beta.iter().chain(self.b.iter()).copied().collect();
        v.extend_from_slice(&[self.w[(0, 0)], self.w[(1, 0)], self.w[(1, 1)]]);
        v
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let k = x.len() - 3;
        Self {
            beta: Vector::from_column_slice(&x[..GLMM_FIXED]),
            b: Vector::from_column_slice(&x[GLMM_FIXED..k]),
            w: Matrix::from_row_slice(2, 2, &[x[k], x[k + 1], x[k + 1], x[k + 2]]),
        }
    }
}

/// Metropolis-within-Gibbs for the GLMM: a joint random walk on β, a
/// random walk on each subject's `(b₀, b₁)` pair, and an exact Wishart draw
/// of the random-effect precision.
#[derive(Clone, Debug)]
pub struct GlmmSampler<'a> {
    model: &'a PoissonGlmm,
    temp: f64,
    rows: Vec<Vec<usize>>,
    beta_proposal: Cholesky,
    b_proposals: Vec<Cholesky>,
    scale_inv: Matrix,
    pub accepted: u64,
    pub proposed: u64,
}

impl<'a> GlmmSampler<'a> {
    /// `latent_precision` is the (tempered) curvature of the log target in η
    /// at a reference point; its diagonal blocks set the proposal shapes.
    pub fn new(model: &'a PoissonGlmm, temp: f64, latent_precision: &Matrix) -> Result<Self> {
        let mut rows = vec![Vec::new(); model.n_subjects];
        for (t, &j) in model.subject.iter().enumerate() {
            rows[j].push(t);
        }
        let block_cov = |start: usize, len: usize| -> Result<Cholesky> {
            let h = latent_precision
                .view((start, start), (len, len))
                .into_owned();
            let cov = Cholesky::new(&h)?.inverse() * (2.38f64.powi(2) / len as f64);
            Cholesky::new(&cov)
        };
        let beta_proposal = block_cov(0, GLMM_FIXED)?;
        let b_proposals = (0..model.n_subjects)
            .map(|j| block_cov(GLMM_FIXED + 2 * j, 2))
            .collect::<Result<Vec<_>>>()?;
        let scale_inv = model
            .wishart_scale
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("Wishart", "singular scale matrix"))?;
        Ok(Self {
            model,
            temp,
            rows,
            beta_proposal,
            b_proposals,
            scale_inv,
            accepted: 0,
            proposed: 0,
        })
    }

    fn subject_ll(&self, j: usize, beta: &[f64], b: &[f64]) -> f64 {
        self.rows[j]
            .iter()
            .map(|&t| poisson_ln_pmf(self.model.y[t], self.model.linear_predictor(t, beta, b)))
            .sum()
    }

    pub fn log_likelihood(&self, state: &GlmmState) -> f64 {
        (0..self.model.n_subjects)
            .map(|j| self.subject_ll(j, state.beta.as_slice(), state.b.as_slice()))
            .sum()
    }

    fn b_log_prior(w: &Matrix, u: f64, v: f64) -> f64 {
        -0.5 * (w[(0, 0)] * u * u + 2.0 * w[(1, 0)] * u * v + w[(1, 1)] * v * v)
    }

    pub fn step(&mut self, state: &mut GlmmState, rng: &mut RngStream) -> Result<()> {
        let t = self.temp;
        let beta_prior = |beta: &Vector| -> f64 {
            beta.iter()
                .map(|v| normal_ln_pdf_var(*v, 0.0, self.model.beta_prior_var))
                .sum()
        };

        // β block
        let cur_ll = self.log_likelihood(state);
        let z = Vector::from_fn(GLMM_FIXED, |_, _| std_normal(rng));
        let cand = &state.beta + self.beta_proposal.mul_lower(&z);
        let cand_ll: f64 = (0..self.model.n_subjects)
            .map(|j| self.subject_ll(j, cand.as_slice(), state.b.as_slice()))
            .sum();
        let log_ratio = t * (cand_ll - cur_ll) + beta_prior(&cand) - beta_prior(&state.beta);
        self.proposed += 1;
        if rng.uniform().ln() < log_ratio {
            state.beta = cand;
            self.accepted += 1;
        }

        // b_j pairs
        for j in 0..self.model.n_subjects {
            let k = 2 * j;
            let (u0, v0) = (state.b[k], state.b[k + 1]);
            let cur = t * self.subject_ll(j, state.beta.as_slice(), state.b.as_slice())
                + Self::b_log_prior(&state.w, u0, v0);
            let z = Vector::from_fn(2, |_, _| std_normal(rng));
            let step = self.b_proposals[j].mul_lower(&z);
            state.b[k] = u0 + step[0];
            state.b[k + 1] = v0 + step[1];
            let prop = t * self.subject_ll(j, state.beta.as_slice(), state.b.as_slice())
                + Self::b_log_prior(&state.w, state.b[k], state.b[k + 1]);
            self.proposed += 1;
            if rng.uniform().ln() < prop - cur {
                self.accepted += 1;
            } else {
                state.b[k] = u0;
                state.b[k + 1] = v0;
            }
        }

        // W | b ~ Wishart(ν + J, (S⁻¹ + Σ b bᵀ)⁻¹)
        let mut s = self.scale_inv.clone();
        for j in 0..self.model.n_subjects {
            let (u, v) = (state.b[2 * j], state.b[2 * j + 1]);
            s[(0, 0)] += u * u;
            s[(0, 1)] += u * v;
            s[(1, 0)] += u * v;
            s[(1, 1)] += v * v;
        }
        let scale = Cholesky::new(&s)?.inverse();
        let df = self.model.wishart_df + self.model.n_subjects as f64;
        state.w = wishart_sample(df, &Cholesky::new(&scale)?, rng);
        Ok(())
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}
