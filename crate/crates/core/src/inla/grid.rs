use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;

use super::gaussian::{gaussian_approx_from, GaussianApprox};
use super::{InlaConfig, InlaStrategy};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorId, EvidenceEstimate};
use crate::model::LatentGaussianView;
use crate::numkit::optim::{fd_gradient, fd_hessian, newton_maximize, NewtonOptions};
use crate::numkit::special::LN_2PI;
use crate::numkit::stats::log_sum_exp;
use crate::numkit::{Cholesky, Matrix, Vector};

const FD_STEP: f64 = 1e-4;
/// Axis exploration gives up after this many steps in one direction.
const MAX_AXIS_STEPS: i64 = 60;

/// Mode of `log p̃(y|θ) + log p(θ)` and its curvature.
#[derive(Clone, Debug)]
pub struct ThetaMode {
    pub theta: Vector,
    pub log_density: f64,
    /// Finite-difference Hessian at the mode.
    pub hessian: Matrix,
    /// Latent mode at θ̂, used to warm-start nearby evaluations.
    pub latent_mode: Vector,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct GridPoint {
    pub z: Vec<i64>,
    pub theta: Vec<f64>,
    pub log_density: f64,
}

/// Grid over θ on the standardized scale `θ = θ̂ + δz · L k`, `LLᵀ = (-∇²)⁻¹`.
#[derive(Clone, Debug)]
pub struct ThetaGrid {
    pub mode: Vector,
    pub transform: Matrix,
    pub delta_z: f64,
    pub pi_z: f64,
    /// `log(δz^dim · |det L|)`, shared by every point.
    pub log_weight: f64,
    pub points: Vec<GridPoint>,
}

impl ThetaGrid {
    pub fn log_evidence(&self) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let dens: Vec<f64> = self.points.iter().map(|p| p.log_density).collect();
        Ok(log_sum_exp(&dens)? + self.log_weight)
    }
}

fn eval_theta(
    view: &LatentGaussianView,
    theta: &[f64],
    start: &Vector,
) -> Result<(f64, GaussianApprox)> {
    let ga = gaussian_approx_from(view, theta, start.clone())?;
    Ok((ga.log_normalizer() + view.log_hyperprior(theta)?, ga))
}

fn initial_theta(view: &LatentGaussianView) -> Vector {
    match view.theta_dim() {
        1 => {
            let var = crate::numkit::stats::variance(view.y.as_slice()).max(1e-8);
            Vector::from_element(1, -var.ln())
        }
        k => Vector::zeros(k),
    }
}

/// Newton search for θ̂ with central finite-difference derivatives.
pub fn find_theta_mode(view: &LatentGaussianView) -> Result<ThetaMode> {
    let k = view.theta_dim();
    if k == 0 {
        let (v, ga) = eval_theta(view, &[], &view.prior_mean)?;
        return Ok(ThetaMode {
            theta: Vector::zeros(0),
            log_density: v,
            hessian: Matrix::zeros(0, 0),
            latent_mode: ga.mode,
            iterations: 0,
        });
    }
    let mut warm = view.prior_mean.clone();
    let mut g = |theta: &Vector| -> Result<f64> {
        let (v, ga) = eval_theta(view, theta.as_slice(), &warm)?;
        warm = ga.mode;
        Ok(v)
    };
    let objective = |theta: &Vector| -> Result<(f64, Vector, Matrix)> {
        let f0 = g(theta)?;
        let grad = fd_gradient(&mut g, theta, FD_STEP)?;
        let hess = fd_hessian(&mut g, theta, f0, FD_STEP)?;
        Ok((f0, grad, hess))
    };
    let opts = NewtonOptions {
        grad_tol: 1e-6,
        max_iter: 100,
    };
    let res = newton_maximize(objective, initial_theta(view), opts).map_err(|e| match e {
        Error::NewtonDivergence { .. } => Error::ModeSearch(format!("hyperparameter mode: {e}")),
        other => other,
    })?;
    let (v, ga) = eval_theta(view, res.x.as_slice(), &view.prior_mean)?;
    Ok(ThetaMode {
        theta: res.x,
        log_density: v,
        hessian: res.hessian,
        latent_mode: ga.mode,
        iterations: res.iterations,
    })
}

impl ThetaGrid {
    /// Explores each signed axis until the drop exceeds `πz`, then fills
    /// in the box spanned by the axis extents.
    pub fn build(
        view: &LatentGaussianView,
        mode: &ThetaMode,
        delta_z: f64,
        pi_z: f64,
    ) -> Result<Self> {
        let k = mode.theta.len();
        let neg = -&mode.hessian;
        let cov = Cholesky::new(&neg)
            .map_err(|e| {
                Error::ModeSearch(format!("hyperparameter Hessian not negative definite: {e}"))
            })?
            .inverse();
        let transform = Cholesky::new(&cov)?.into_factor();
        let log_det_l: f64 = transform.diagonal().iter().map(|v| v.ln()).sum();
        let log_weight = k as f64 * delta_z.ln() + log_det_l;

        let theta_at = |idx: &[i64]| -> Vec<f64> {
            let z = Vector::from_iterator(k, idx.iter().map(|&i| i as f64 * delta_z));
            (&mode.theta + &transform * z).iter().copied().collect()
        };
        let eval = |idx: &[i64]| -> Result<GridPoint> {
            let theta = theta_at(idx);
            let (v, _) = eval_theta(view, &theta, &mode.latent_mode)?;
            Ok(GridPoint {
                z: idx.to_vec(),
                theta,
                log_density: v,
            })
        };

        let mut points = vec![GridPoint {
            z: vec![0; k],
            theta: mode.theta.iter().copied().collect(),
            log_density: mode.log_density,
        }];
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        seen.insert(vec![0; k]);
        let mut lo = vec![0i64; k];
        let mut hi = vec![0i64; k];
        for axis in 0..k {
            for sign in [1i64, -1] {
                let mut step = 1;
                loop {
                    if step > MAX_AXIS_STEPS {
                        return Err(Error::ModeSearch(format!(
                            "grid axis {axis} did not drop by {pi_z} within {MAX_AXIS_STEPS} steps"
                        )));
                    }
                    let mut idx = vec![0i64; k];
                    idx[axis] = sign * step;
                    let p = eval(&idx)?;
                    seen.insert(idx);
                    if mode.log_density - p.log_density > pi_z {
                        break;
                    }
                    points.push(p);
                    if sign > 0 {
                        hi[axis] = step;
                    } else {
                        lo[axis] = -step;
                    }
                    step += 1;
                }
            }
        }

        let mut fill = Vec::new();
        let mut idx = lo.clone();
        if k > 1 {
            'outer: loop {
                if !seen.contains(&idx) {
                    fill.push(idx.clone());
                }
                for a in 0..k {
                    if idx[a] < hi[a] {
                        idx[a] += 1;
                        continue 'outer;
                    }
                    idx[a] = lo[a];
                }
                break;
            }
        }
        let evaluated: Vec<Result<GridPoint>> = fill.par_iter().map(|i| eval(i)).collect();
        for p in evaluated {
            let p = p?;
            if mode.log_density - p.log_density <= pi_z {
                points.push(p);
            }
        }
        Ok(Self {
            mode: mode.theta.clone(),
            transform,
            delta_z,
            pi_z,
            log_weight,
            points,
        })
    }
}

/// Nested Laplace evidence, integrating θ by empirical Bayes or on a grid.
pub fn inla_evidence(view: &LatentGaussianView, cfg: &InlaConfig) -> Result<EvidenceEstimate> {
    cfg.validate()?;
    let start = Instant::now();
    let mode = find_theta_mode(view)?;
    let k = mode.theta.len();
    let mut est = if k == 0 {
        EvidenceEstimate::new(EstimatorId::Inla, mode.log_density).with_diag("grid_points", 1usize)
    } else {
        match cfg.strategy {
            InlaStrategy::Eb => {
                let chol = Cholesky::new(&(-&mode.hessian)).map_err(|e| {
                    Error::ModeSearch(format!("hyperparameter Hessian not negative definite: {e}"))
                })?;
                let v = mode.log_density + 0.5 * k as f64 * LN_2PI - 0.5 * chol.log_det();
                EvidenceEstimate::new(EstimatorId::Inla, v).with_diag("grid_points", 1usize)
            }
            InlaStrategy::Grid => {
                let grid = ThetaGrid::build(view, &mode, cfg.delta_z, cfg.pi_z)?;
                EvidenceEstimate::new(EstimatorId::Inla, grid.log_evidence()?)
                    .with_diag("grid_points", grid.points.len())
            }
        }
    };
    est = est
        .with_diag(
            "strategy",
            match cfg.strategy {
                InlaStrategy::Eb => "eb",
                InlaStrategy::Grid => "grid",
            },
        )
        .with_diag("delta_z", cfg.delta_z)
        .with_diag("pi_z", cfg.pi_z)
        .with_iterations(mode.iterations as u64);
    for (i, t) in mode.theta.iter().enumerate() {
        est = est.with_diag(&format!("theta_mode_{i}"), *t);
    }
    est.wall_time = start.elapsed();
    est.validated()
}
