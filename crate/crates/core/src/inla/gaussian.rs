use crate::error::{Error, Result};
use crate::model::LatentGaussianView;
use crate::numkit::linalg::weighted_gram;
use crate::numkit::optim::{newton_maximize, NewtonOptions};
use crate::numkit::special::LN_2PI;
use crate::numkit::{Cholesky, Matrix, Vector};

/// Gaussian approximation to `p(η | y, θ)`.
#[derive(Clone, Debug)]
pub struct GaussianApprox {
    pub mode: Vector,
    /// `H = Q(θ) + Aᵀ diag(-ℓ'') A` at the mode.
    pub precision: Matrix,
    pub chol: Cholesky,
    /// `log p(y | η*, θ) + log p(η* | θ)`.
    pub log_joint_at_mode: f64,
    pub iterations: usize,
}

impl GaussianApprox {
    /// `log ∫ p(y|η,θ) p(η|θ) dη` under the approximation.
    pub fn log_normalizer(&self) -> f64 {
        self.log_joint_at_mode + 0.5 * self.mode.len() as f64 * LN_2PI - 0.5 * self.chol.log_det()
    }
}

pub fn gaussian_approx(view: &LatentGaussianView, theta: &[f64]) -> Result<GaussianApprox> {
    gaussian_approx_from(view, theta, view.prior_mean.clone())
}

/// Newton search for the conditional mode starting from `start`.
pub fn gaussian_approx_from(
    view: &LatentGaussianView,
    theta: &[f64],
    start: Vector,
) -> Result<GaussianApprox> {
    let q = view.precision(theta)?;
    let q_logdet = view.precision_logdet(theta)?;
    let d = view.latent_dim();
    let objective = |eta: &Vector| -> Result<(f64, Vector, Matrix)> {
        let lin = view.linear_predictor(eta);
        let terms = view.obs_terms(theta, &lin)?;
        let diff = eta - &view.prior_mean;
        let q_diff = &q * &diff;
        let value =
            terms.log_lik + 0.5 * q_logdet - 0.5 * diff.dot(&q_diff) - 0.5 * d as f64 * LN_2PI;
        let grad = view.design.tr_mul(&terms.d1) - q_diff;
        let hess = -(weighted_gram(&view.design, &(-&terms.d2)) + &q);
        Ok((value, grad, hess))
    };
    let res = newton_maximize(objective, start, NewtonOptions::default())?;
    let precision = -res.hessian;
    let chol = Cholesky::new(&precision)
        .map_err(|e| Error::ModeSearch(format!("latent precision at mode: {e}")))?;
    Ok(GaussianApprox {
        mode: res.x,
        precision,
        chol,
        log_joint_at_mode: res.value,
        iterations: res.iterations,
    })
}

/// `log p̃(y | θ) + log p(θ)`: the joint density over the Gaussian ordinate
/// at the conditional mode.
pub fn log_evidence_given_theta(view: &LatentGaussianView, theta: &[f64]) -> Result<f64> {
    let ga = gaussian_approx(view, theta)?;
    Ok(ga.log_normalizer() + view.log_hyperprior(theta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BinaryRegression, GaussLinReg, ModelSpec, ToyGaussian};
    use crate::numkit::dist::mvn_ln_pdf;
    use crate::numkit::RngStream;

    #[test]
    fn toy_is_exact() {
        let spec = ModelSpec::ToyGaussian(ToyGaussian::new(2.0, 10.0, 1.0).unwrap());
        let view = LatentGaussianView::new(&spec).unwrap();
        let v = log_evidence_given_theta(&view, &[]).unwrap();
        let exact = -0.5 * (LN_2PI + 101f64.ln()) - 2.0 / 101.0;
        assert!((v - exact).abs() < 1e-12);
        assert!((v - -3.2463).abs() < 5e-5);
    }

    #[test]
    fn gaussian_case_converges_in_one_step() {
        let mut rng = RngStream::new(1, 0);
        let x = Matrix::from_fn(30, 3, |_, j| {
            if j == 0 {
                1.0
            } else {
                crate::numkit::dist::std_normal(&mut rng)
            }
        });
        let y = Vector::from_fn(30, |i, _| (i as f64).sin());
        let spec = ModelSpec::GaussLinReg(
            GaussLinReg::new(y.clone(), x.clone(), 0.5, 3.0, 2.0, 1.0).unwrap(),
        );
        let view = LatentGaussianView::new(&spec).unwrap();
        let theta = [0.7];
        let ga = gaussian_approx(&view, &theta).unwrap();
        assert!(ga.iterations <= 1);
        // Conditional evidence y ~ N(Xμ, σ²I + σβ² XXᵀ) with σ² = e^{-θ}.
        let s2 = (-0.7f64).exp();
        let cov = Matrix::identity(30, 30) * s2 + &x * x.transpose() * 3.0;
        let mean = &x * Vector::from_element(3, 0.5);
        let exact = mvn_ln_pdf(&y, &mean, &Cholesky::new(&cov).unwrap()).unwrap();
        assert!((ga.log_normalizer() - exact).abs() < 1e-8);
    }

    #[test]
    fn logit_mode_matches_gradient_ascent() {
        let mut rng = RngStream::new(2, 0);
        let n = 80;
        let x = Matrix::from_fn(n, 2, |_, j| {
            if j == 0 {
                1.0
            } else {
                crate::numkit::dist::std_normal(&mut rng)
            }
        });
        let y = Vector::from_fn(n, |i, _| {
            if x[(i, 1)] + 0.3 > rng.uniform() * 2.0 - 1.0 {
                1.0
            } else {
                0.0
            }
        });
        let spec =
            ModelSpec::LogitReg(BinaryRegression::new(y.clone(), x.clone(), 0.0, 100.0).unwrap());
        let view = LatentGaussianView::new(&spec).unwrap();
        let ga = gaussian_approx(&view, &[]).unwrap();
        // Plain gradient ascent with a fixed small step.
        let mut b = Vector::zeros(2);
        for _ in 0..200_000 {
            let lin = &x * &b;
            let r = Vector::from_fn(n, |i, _| y[i] - 1.0 / (1.0 + (-lin[i]).exp()));
            let g = x.tr_mul(&r) - &b / 100.0;
            b += g * 0.02;
        }
        assert!((&b - &ga.mode).amax() < 1e-6, "{b} vs {}", ga.mode);
    }
}
