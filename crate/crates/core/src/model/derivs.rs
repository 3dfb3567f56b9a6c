//! Value, gradient and Hessian of the internal-scale log joint density.

use super::latent::LatentGaussianView;
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::numkit::linalg::{symmetrize, weighted_gram};
use crate::numkit::optim::{newton_maximize, NewtonOptions, NewtonResult};
use crate::numkit::{Matrix, Vector};

impl LatentGaussianView {
    fn split<'a>(&self, psi: &'a [f64]) -> Result<(Vector, &'a [f64])> {
        let d = self.latent_dim();
        if psi.len() != d + self.theta_dim() {
            return Err(Error::DimensionMismatch {
                expected: d + self.theta_dim(),
                actual: psi.len(),
                context: "internal parameter vector",
            });
        }
        Ok((Vector::from_column_slice(&psi[..d]), &psi[d..]))
    }

    /// Log joint of `ψ = (η, θ)` and its analytic gradient.
    pub fn log_joint_grad(&self, psi: &[f64]) -> Result<(f64, Vector)> {
        let (eta, theta) = self.split(psi)?;
        let d = eta.len();
        let lin = self.linear_predictor(&eta);
        let terms = self.obs_terms(theta, &lin)?;
        let q = self.precision(theta)?;
        let diff = &eta - &self.prior_mean;
        let q_diff = &q * &diff;
        let value = terms.log_lik + 0.5 * self.precision_logdet(theta)?
            - 0.5 * diff.dot(&q_diff)
            - 0.5 * d as f64 * crate::numkit::special::LN_2PI
            + self.log_hyperprior(theta)?;

        let mut grad = Vector::zeros(psi.len());
        let g_eta = self.design.tr_mul(&terms.d1) - q_diff;
        grad.rows_mut(0, d).copy_from(&g_eta);
        match self.theta_dim() {
            0 => {}
            1 => {
                // θ = log τ: ℓ_t = ½θ - ½ log 2π - ½ e^θ r²
                let (shape, rate) = self.gamma_hyper().expect("gamma hyperprior");
                let tau = theta[0].exp();
                let rss: f64 = (&self.y - &lin).norm_squared();
                grad[d] = 0.5 * self.n_obs() as f64 - 0.5 * tau * rss + shape - rate * tau;
            }
            _ => {
                let g = self.wishart_theta_grad(theta, &eta)?;
                grad.rows_mut(d, 3).copy_from(&g);
            }
        }
        Ok((value, grad))
    }

    /// Log joint, gradient and Hessian. The latent block and the Gaussian
    /// log-precision block are analytic; Wishart hyperparameter rows are
    /// central differences of the analytic gradient.
    pub fn log_joint_derivs(&self, psi: &[f64]) -> Result<(f64, Vector, Matrix)> {
        let (value, grad) = self.log_joint_grad(psi)?;
        let (eta, theta) = self.split(psi)?;
        let d = eta.len();
        let k = self.theta_dim();
        let lin = self.linear_predictor(&eta);
        let terms = self.obs_terms(theta, &lin)?;
        let q = self.precision(theta)?;
        let mut hess = Matrix::zeros(d + k, d + k);
        let h_eta = -(weighted_gram(&self.design, &(-&terms.d2)) + q);
        hess.view_mut((0, 0), (d, d)).copy_from(&h_eta);
        match k {
            0 => {}
            1 => {
                let (_, rate) = self.gamma_hyper().expect("gamma hyperprior");
                let tau = theta[0].exp();
                let resid = &self.y - &lin;
                let cross = self.design.tr_mul(&resid) * tau;
                hess.view_mut((0, d), (d, 1)).copy_from(&cross);
                hess.view_mut((d, 0), (1, d)).copy_from(&cross.transpose());
                hess[(d, d)] = -0.5 * tau * resid.norm_squared() - rate * tau;
            }
            _ => {
                let h = 1e-5;
                let mut p = psi.to_vec();
                for c in 0..k {
                    p[d + c] = psi[d + c] + h;
                    let (_, gp) = self.log_joint_grad(&p)?;
                    p[d + c] = psi[d + c] - h;
                    let (_, gm) = self.log_joint_grad(&p)?;
                    p[d + c] = psi[d + c];
                    let col = (gp - gm) / (2.0 * h);
                    for r in 0..d + k {
                        hess[(r, d + c)] = col[r];
                        hess[(d + c, r)] = col[r];
                    }
                }
                symmetrize(&mut hess);
            }
        }
        Ok((value, grad, hess))
    }

    /// Gradient of the θ-dependent terms for the Wishart block:
    /// c·log|W| - ½ tr(N W) + log J with N = Σ b bᵀ + S⁻¹.
    fn wishart_theta_grad(&self, theta: &[f64], eta: &Vector) -> Result<Vector> {
        let (df, scale_inv, fixed, groups) = self.wishart_hyper().expect("wishart hyperprior");
        let mut n = scale_inv.clone();
        for g in 0..groups {
            let u = eta[fixed + 2 * g];
            let v = eta[fixed + 2 * g + 1];
            n[(0, 0)] += u * u;
            n[(0, 1)] += u * v;
            n[(1, 0)] += u * v;
            n[(1, 1)] += v * v;
        }
        let l11 = theta[0].exp();
        let l22 = theta[1].exp();
        let l = Matrix::from_row_slice(2, 2, &[l11, 0.0, theta[2], l22]);
        let nl = &n * &l;
        let c = 0.5 * groups as f64 + 0.5 * (df - 3.0);
        Ok(Vector::from_vec(vec![
            2.0 * c - nl[(0, 0)] * l11 + 3.0,
            2.0 * c - nl[(1, 1)] * l22 + 2.0,
            -nl[(1, 0)],
        ]))
    }
}

impl ModelSpec {
    /// Log joint in internal scale with analytic gradient and Hessian.
    pub fn log_joint_derivs(&self, psi: &[f64]) -> Result<(f64, Vector, Matrix)> {
        LatentGaussianView::new(self)?.log_joint_derivs(psi)
    }

    /// Starting point for mode searches: the prior mean of η and a
    /// data-informed guess for θ.
    pub fn initial_internal(&self) -> Vec<f64> {
        let mut psi = vec![0.0; self.param_dim()];
        match self {
            ModelSpec::GaussLinReg(m) => {
                psi[..m.n_coef()].fill(m.prior_mean);
                let var = crate::numkit::stats::variance(m.y.as_slice()).max(1e-8);
                psi[m.n_coef()] = -var.ln();
            }
            ModelSpec::ProbitReg(m) | ModelSpec::LogitReg(m) => psi.fill(m.prior_mean),
            _ => {}
        }
        psi
    }

    /// Joint posterior mode over all internal-scale parameters.
    pub fn posterior_mode(&self) -> Result<NewtonResult> {
        let view = LatentGaussianView::new(self)?;
        let x0 = Vector::from_vec(self.initial_internal());
        newton_maximize(
            |x| view.log_joint_derivs(x.as_slice()),
            x0,
            NewtonOptions::default(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spec::*;
    use crate::numkit::optim::{fd_gradient, fd_hessian};
    use crate::numkit::RngStream;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    fn check(spec: &ModelSpec, center: &[f64], spread: f64, seed: u64) {
        let view = LatentGaussianView::new(spec).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..20 {
            let psi: Vec<f64> = center
                .iter()
                .map(|c| c + spread * (rng.uniform() - 0.5))
                .collect();
            let (v, g, h) = view.log_joint_derivs(&psi).unwrap();
            let direct = spec.log_joint_internal(&psi).unwrap();
            assert!(
                rel(v, direct) < 1e-10,
                "{} value {v} vs {direct}",
                spec.kind()
            );
            let x = Vector::from_vec(psi.clone());
            let f = |p: &Vector| spec.log_joint_internal(p.as_slice());
            let fg = fd_gradient(f, &x, 1e-5).unwrap();
            let fh = fd_hessian(f, &x, direct, 1e-4).unwrap();
            for i in 0..psi.len() {
                assert!(
                    rel(g[i], fg[i]) < 1e-5,
                    "{} grad[{i}] {} vs {}",
                    spec.kind(),
                    g[i],
                    fg[i]
                );
                for j in 0..psi.len() {
                    assert!(
                        rel(h[(i, j)], fh[(i, j)]) < 1e-5,
                        "{} hess[{i},{j}] {} vs {}",
                        spec.kind(),
                        h[(i, j)],
                        fh[(i, j)]
                    );
                }
            }
        }
    }

    fn design(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = RngStream::new(seed, 1);
        Matrix::from_fn(n, p, |_, j| {
            if j == 0 {
                1.0
            } else {
                2.0 * (rng.uniform() - 0.5)
            }
        })
    }

    #[test]
    fn toy_derivatives() {
        let spec = ModelSpec::ToyGaussian(ToyGaussian::new(2.0, 3.0, 1.0).unwrap());
        check(&spec, &[1.0], 4.0, 1);
    }

    #[test]
    fn gausslinreg_derivatives() {
        let x = design(15, 3, 2);
        let y = Vector::from_fn(15, |i, _| (i as f64 * 0.37).sin());
        let spec = ModelSpec::GaussLinReg(GaussLinReg::new(y, x, 0.5, 2.0, 2.0, 1.5).unwrap());
        check(&spec, &[0.1, -0.2, 0.3, 0.5], 1.0, 3);
    }

    #[test]
    fn binary_derivatives() {
        let x = design(25, 3, 4);
        let y = Vector::from_fn(25, |i, _| ((i * 3) % 2) as f64);
        let m = BinaryRegression::new(y, x, 0.0, 4.0).unwrap();
        check(&ModelSpec::ProbitReg(m.clone()), &[0.2, -0.5, 0.4], 1.5, 5);
        check(&ModelSpec::LogitReg(m), &[0.2, -0.5, 0.4], 1.5, 6);
    }

    #[test]
    fn glmm_derivatives() {
        let subjects: Vec<i64> = (0..4).flat_map(|j| std::iter::repeat_n(j, 5)).collect();
        let n = subjects.len();
        let period = Vector::from_fn(n, |i, _| if i % 5 == 0 { 0.0 } else { 1.0 });
        let trt = Vector::from_fn(n, |i, _| if i >= 10 { 1.0 } else { 0.0 });
        let offset = Vector::from_fn(n, |i, _| if i % 5 == 0 { 8.0 } else { 2.0 });
        let y = Vector::from_fn(n, |i, _| ((i * 7) % 6) as f64);
        let spec =
            ModelSpec::PoissonGlmm(PoissonGlmm::new(y, period, trt, offset, &subjects).unwrap());
        let mut center = vec![0.1; spec.latent_dim()];
        center.extend_from_slice(&[0.3, 0.2, -0.1]);
        check(&spec, &center, 0.4, 7);
    }
}
