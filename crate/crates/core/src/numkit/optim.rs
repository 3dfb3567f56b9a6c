//! Damped Newton ascent and central finite differences.

use super::linalg::{Cholesky, Matrix, Vector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub x: Vector,
    pub value: f64,
    pub gradient: Vector,
    pub hessian: Matrix,
    pub iterations: usize,
}

/// Maximizes `f`, which returns `(value, gradient, hessian)`.
///
/// The Newton direction uses `-H + λI`, with `λ` raised until the shifted
/// matrix factorizes, and steps are halved until the objective does not
/// decrease.
pub fn newton_maximize<F>(mut f: F, x0: Vector, opts: NewtonOptions) -> Result<NewtonResult>
where
    F: FnMut(&Vector) -> Result<(f64, Vector, Matrix)>,
{
    let mut x = x0;
    let (mut value, mut grad, mut hess) = f(&x)?;
    for iter in 0..opts.max_iter {
        let gnorm = grad.amax();
        if !value.is_finite() || !gnorm.is_finite() {
            return Err(Error::NonFinite("newton objective"));
        }
        if gnorm < opts.grad_tol {
            return Ok(NewtonResult {
                x,
                value,
                gradient: grad,
                hessian: hess,
                iterations: iter,
            });
        }
        let n = x.len();
        let neg = -&hess;
        let mut lambda = 0.0;
        let step = loop {
            let shifted = &neg + Matrix::identity(n, n) * lambda;
            match Cholesky::new(&shifted) {
                Ok(c) => break c.solve(&grad),
                Err(_) => {
                    lambda = if lambda == 0.0 {
                        1e-6 * (1.0 + neg.diagonal().amax())
                    } else {
                        lambda * 10.0
                    };
                    if !lambda.is_finite() {
                        return Err(Error::NonFinite("newton damping"));
                    }
                }
            }
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x + &step * alpha;
            if let Ok((v, g, h)) = f(&cand) {
                if v.is_finite() && v >= value - 1e-12 * value.abs().max(1.0) {
                    x = cand;
                    value = v;
                    grad = g;
                    hess = h;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence {
                iterations: iter + 1,
                grad_norm: gnorm,
                last_iterate: x.iter().copied().collect(),
            });
        }
    }
    Err(Error::NewtonDivergence {
        iterations: opts.max_iter,
        grad_norm: grad.amax(),
        last_iterate: x.iter().copied().collect(),
    })
}

/// Central-difference gradient with step `h` on every coordinate.
pub fn fd_gradient<F>(mut f: F, x: &Vector, h: f64) -> Result<Vector>
where
    F: FnMut(&Vector) -> Result<f64>,
{
    let n = x.len();
    let mut g = Vector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Central-difference Hessian. `f0` is `f(x)`, reused for the diagonal.
pub fn fd_hessian<F>(mut f: F, x: &Vector, f0: f64, h: f64) -> Result<Matrix>
where
    F: FnMut(&Vector) -> Result<f64>,
{
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut xp = x.clone();
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| -> Result<f64> {
                xp[i] = x[i] + si * h;
                xp[j] = x[j] + sj * h;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}
