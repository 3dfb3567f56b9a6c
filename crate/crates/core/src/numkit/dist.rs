//! Log densities and samplers for the distributions the models are built from.

use rand_distr::{Distribution as _, Gamma as GammaDist, Poisson as PoissonDist, StandardNormal};

use super::linalg::{Cholesky, Matrix, Vector};
use super::rng::RngStream;
use super::special::{ln_gamma, ln_multigamma, log_norm_cdf_pair, LN_2PI, LN_SQRT_2PI};
use crate::error::{Error, Result};

/// A point in the support of some [`Distribution`].
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vector(Vector),
    Matrix(Matrix),
}

impl Value {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Distribution {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Normal restricted to `(lower, upper)`; either bound may be infinite.
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lower: f64,
        upper: f64,
    },
    MvNormal {
        mean: Vector,
        cov: Matrix,
    },
    /// Shape/rate parameterization: density ∝ x^(shape-1) e^(-rate x).
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Wishart on p×p matrices with `df` degrees of freedom and scale `S`,
    /// density ∝ |W|^((df-p-1)/2) exp(-tr(S⁻¹W)/2).
    Wishart {
        df: f64,
        scale: Matrix,
    },
    Bernoulli {
        p: f64,
    },
    Poisson {
        rate: f64,
    },
}

impl Distribution {
    fn name(&self) -> &'static str {
        match self {
            Distribution::Normal { .. } => "normal",
            Distribution::TruncatedNormal { .. } => "truncated normal",
            Distribution::MvNormal { .. } => "multivariate normal",
            Distribution::Gamma { .. } => "gamma",
            Distribution::Wishart { .. } => "wishart",
            Distribution::Bernoulli { .. } => "bernoulli",
            Distribution::Poisson { .. } => "poisson",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid(self.name(), reason));
        match self {
            Distribution::Normal { mean, sd } => {
                if !mean.is_finite() || !(*sd >= 0.0) || !sd.is_finite() {
                    return bad("need finite mean and sd >= 0");
                }
            }
            Distribution::TruncatedNormal {
                mean,
                sd,
                lower,
                upper,
            } => {
                if !mean.is_finite() || !(*sd > 0.0) || !(lower < upper) {
                    return bad("need finite mean, sd > 0 and lower < upper");
                }
            }
            Distribution::MvNormal { mean, cov } => {
                if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
                    return bad("covariance shape does not match mean");
                }
            }
            Distribution::Gamma { shape, rate } => {
                if !(*shape > 0.0) || !(*rate > 0.0) {
                    return bad("need shape > 0 and rate > 0");
                }
            }
            Distribution::Wishart { df, scale } => {
                let p = scale.nrows();
                if scale.ncols() != p || p == 0 {
                    return bad("scale must be square");
                }
                if !(*df > p as f64 - 1.0) {
                    return bad("need df > dim - 1");
                }
            }
            Distribution::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return bad("need 0 <= p <= 1");
                }
            }
            Distribution::Poisson { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return bad("need rate > 0");
                }
            }
        }
        Ok(())
    }

    /// Natural-log density (or mass) at `x`.
    pub fn log_density(&self, x: &Value) -> Result<f64> {
        self.validate()?;
        let wrong = || Error::invalid(self.name(), "point has the wrong shape");
        match self {
            Distribution::Normal { mean, sd } => {
                let x = x.scalar().ok_or_else(wrong)?;
                normal_ln_pdf(x, *mean, *sd)
            }
            Distribution::TruncatedNormal {
                mean,
                sd,
                lower,
                upper,
            } => {
                let x = x.scalar().ok_or_else(wrong)?;
                if x <= *lower || x >= *upper {
                    return Ok(f64::NEG_INFINITY);
                }
                let mass = log_interval_mass((lower - mean) / sd, (upper - mean) / sd);
                Ok(normal_ln_pdf(x, *mean, *sd)? - mass)
            }
            Distribution::MvNormal { mean, cov } => match x {
                Value::Vector(v) => mvn_ln_pdf(v, mean, &Cholesky::new(cov)?),
                _ => Err(wrong()),
            },
            Distribution::Gamma { shape, rate } => {
                let x = x.scalar().ok_or_else(wrong)?;
                Ok(gamma_ln_pdf(x, *shape, *rate))
            }
            Distribution::Wishart { df, scale } => match x {
                Value::Matrix(w) => wishart_ln_pdf(w, *df, scale),
                _ => Err(wrong()),
            },
            Distribution::Bernoulli { p } => {
                let x = x.scalar().ok_or_else(wrong)?;
                Ok(if x == 1.0 {
                    p.ln()
                } else if x == 0.0 {
                    (-p).ln_1p()
                } else {
                    f64::NEG_INFINITY
                })
            }
            Distribution::Poisson { rate } => {
                let x = x.scalar().ok_or_else(wrong)?;
                Ok(poisson_ln_pmf(x, rate.ln()))
            }
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Value> {
        self.validate()?;
        Ok(match self {
            Distribution::Normal { mean, sd } => Value::Scalar(mean + sd * std_normal(rng)),
            Distribution::TruncatedNormal {
                mean,
                sd,
                lower,
                upper,
            } => Value::Scalar(
                mean + sd * truncated_std_normal((lower - mean) / sd, (upper - mean) / sd, rng),
            ),
            Distribution::MvNormal { mean, cov } => {
                Value::Vector(mvn_sample(mean, &Cholesky::new(cov)?, rng))
            }
            Distribution::Gamma { shape, rate } => Value::Scalar(gamma_sample(*shape, *rate, rng)),
            Distribution::Wishart { df, scale } => {
                Value::Matrix(wishart_sample(*df, &Cholesky::new(scale)?, rng))
            }
            Distribution::Bernoulli { p } => {
                Value::Scalar(if rng.uniform() < *p { 1.0 } else { 0.0 })
            }
            Distribution::Poisson { rate } => {
                let d = PoissonDist::new(*rate)
                    .map_err(|e| Error::invalid("poisson", e.to_string()))?;
                Value::Scalar(d.sample(rng))
            }
        })
    }
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    if sd == 0.0 {
        return Ok(if x == mean {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        });
    }
    let z = (x - mean) / sd;
    Ok(-0.5 * z * z - sd.ln() - LN_SQRT_2PI)
}

/// log N(x; mean, var) without validation; hot-path helper.
#[inline]
pub fn normal_ln_pdf_var(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + var.ln() + LN_2PI)
}

pub fn mvn_ln_pdf(x: &Vector, mean: &Vector, cov: &Cholesky) -> Result<f64> {
    if x.len() != mean.len() || cov.dim() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            actual: x.len(),
            context: "multivariate normal density",
        });
    }
    let d = x - mean;
    Ok(-0.5 * (cov.inv_quad(&d) + cov.log_det() + mean.len() as f64 * LN_2PI))
}

/// Multivariate normal log density parameterized by a precision Cholesky
/// factor (`Q = L Lᵀ`).
pub fn mvn_ln_pdf_precision(x: &Vector, mean: &Vector, precision: &Cholesky) -> f64 {
    let d = x - mean;
    let q = (precision.factor().transpose() * d).norm_squared();
    -0.5 * (q - precision.log_det() + mean.len() as f64 * LN_2PI)
}

pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// log Poisson mass at count `k` given the log rate.
pub fn poisson_ln_pmf(k: f64, log_rate: f64) -> f64 {
    if k < 0.0 || k.fract() != 0.0 {
        return f64::NEG_INFINITY;
    }
    k * log_rate - log_rate.exp() - ln_gamma(k + 1.0)
}

pub fn wishart_ln_pdf(w: &Matrix, df: f64, scale: &Matrix) -> Result<f64> {
    let p = scale.nrows();
    if w.nrows() != p || w.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: w.nrows(),
            context: "wishart point",
        });
    }
    let wc = Cholesky::new(w)?;
    let sc = Cholesky::new(scale)?;
    let pf = p as f64;
    let trace = (sc.inverse() * w).trace();
    Ok((df - pf - 1.0) / 2.0 * wc.log_det()
        - 0.5 * trace
        - df * pf / 2.0 * std::f64::consts::LN_2
        - df / 2.0 * sc.log_det()
        - ln_multigamma(p, df / 2.0))
}

#[inline]
pub fn std_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gamma_sample(shape: f64, rate: f64, rng: &mut RngStream) -> f64 {
    GammaDist::new(shape, 1.0 / rate)
        .expect("validated gamma parameters")
        .sample(rng)
}

pub fn mvn_sample(mean: &Vector, cov: &Cholesky, rng: &mut RngStream) -> Vector {
    let z = Vector::from_fn(mean.len(), |_, _| std_normal(rng));
    mean + cov.mul_lower(&z)
}

/// Draw from N(mean, Q⁻¹) given the Cholesky factor of the precision `Q`.
pub fn mvn_sample_precision(mean: &Vector, precision: &Cholesky, rng: &mut RngStream) -> Vector {
    let z = Vector::from_fn(mean.len(), |_, _| std_normal(rng));
    mean + precision.solve_upper(&z)
}

/// Bartlett decomposition: W = L A Aᵀ Lᵀ with `L` the scale factor.
pub fn wishart_sample(df: f64, scale: &Cholesky, rng: &mut RngStream) -> Matrix {
    let p = scale.dim();
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        a[(i, i)] = (2.0 * gamma_sample((df - i as f64) / 2.0, 1.0, rng)).sqrt();
        for j in 0..i {
            a[(i, j)] = std_normal(rng);
        }
    }
    let la = scale.factor() * a;
    &la * la.transpose()
}

/// log(Φ(b) - Φ(a)) for a < b.
fn log_interval_mass(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return log_norm_cdf_pair(b).0;
    }
    if b == f64::INFINITY {
        return log_norm_cdf_pair(a).1;
    }
    // Work on the side with the smaller tail for accuracy.
    let (la, lb) = if a > 0.0 {
        (log_norm_cdf_pair(b).1, log_norm_cdf_pair(a).1)
    } else {
        (log_norm_cdf_pair(a).0, log_norm_cdf_pair(b).0)
    };
    lb + (-(la - lb).exp()).ln_1p()
}

/// Standard normal truncated to `(lower, upper)`.
///
/// One-sided truncations use naive rejection when the retained mass is at
/// least one half and Robert's exponential proposal otherwise. Two-sided
/// intervals use uniform rejection on short intervals.
pub fn truncated_std_normal(lower: f64, upper: f64, rng: &mut RngStream) -> f64 {
    if upper == f64::INFINITY {
        return lower_tail(lower, rng);
    }
    if lower == f64::NEG_INFINITY {
        return -lower_tail(-upper, rng);
    }
    // Two-sided.
    if lower >= 0.0 {
        interval_positive(lower, upper, rng)
    } else if upper <= 0.0 {
        -interval_positive(-upper, -lower, rng)
    } else {
        loop {
            let z = std_normal(rng);
            if z > lower && z < upper {
                return z;
            }
            // Short interval straddling zero: uniform proposal.
            if upper - lower < 1.0 {
                let u = lower + (upper - lower) * rng.uniform();
                if rng.uniform() <= (-0.5 * u * u).exp() {
                    return u;
                }
            }
        }
    }
}

fn lower_tail(a: f64, rng: &mut RngStream) -> f64 {
    if a <= 0.0 {
        loop {
            let z = std_normal(rng);
            if z > a {
                return z;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - rng.uniform().ln() / alpha;
        let rho = (-0.5 * (z - alpha) * (z - alpha)).exp();
        if rng.uniform() <= rho {
            return z;
        }
    }
}

fn interval_positive(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    // Uniform proposal with envelope at the left end works when the
    // interval is short relative to the density decay there.
    if (b - a) * a < 2.0 || b - a < 0.5 {
        loop {
            let z = a + (b - a) * rng.uniform();
            if rng.uniform() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    loop {
        let z = lower_tail(a, rng);
        if z < b {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(draws: &[f64]) -> (f64, f64) {
        let n = draws.len() as f64;
        let m = draws.iter().sum::<f64>() / n;
        let v = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn standard_normal_at_mode() {
        let d = Distribution::Normal { mean: 0.0, sd: 1.0 };
        let v = d.log_density(&Value::Scalar(0.0)).unwrap();
        assert!((v - (-0.918_938_533_204_672_8)).abs() < 1e-15);
    }

    #[test]
    fn exponential_case_of_gamma() {
        let d = Distribution::Gamma {
            shape: 1.0,
            rate: 1.0,
        };
        assert!((d.log_density(&Value::Scalar(1.0)).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn wishart_matches_hand_evaluation() {
        // Wishart₂(4, I) at I: 0·log|I| - tr(I)/2 - 4 ln 2 - ln Γ₂(2), Γ₂(2) = π/2.
        let oracle = -1.0 - 4.0 * std::f64::consts::LN_2 - (std::f64::consts::PI / 2.0).ln();
        let d = Distribution::Wishart {
            df: 4.0,
            scale: Matrix::identity(2, 2),
        };
        let v = d
            .log_density(&Value::Matrix(Matrix::identity(2, 2)))
            .unwrap();
        assert!((v - oracle).abs() < 1e-13, "{v} vs {oracle}");
    }

    #[test]
    fn bernoulli_and_poisson() {
        let b = Distribution::Bernoulli { p: 0.25 };
        assert!((b.log_density(&Value::Scalar(1.0)).unwrap() - 0.25f64.ln()).abs() < 1e-15);
        assert!((b.log_density(&Value::Scalar(0.0)).unwrap() - 0.75f64.ln()).abs() < 1e-15);
        let p = Distribution::Poisson { rate: 2.0 };
        let v = p.log_density(&Value::Scalar(3.0)).unwrap();
        assert!((v - (3.0 * 2f64.ln() - 2.0 - 6f64.ln())).abs() < 1e-13);
    }

    #[test]
    fn mvn_diagonal_is_sum_of_univariate() {
        let mean = Vector::from_vec(vec![1.0, -1.0]);
        let cov = Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 0.25]));
        let d = Distribution::MvNormal { mean, cov };
        let x = Vector::from_vec(vec![0.0, 0.0]);
        let want = normal_ln_pdf(0.0, 1.0, 2.0).unwrap() + normal_ln_pdf(0.0, -1.0, 0.5).unwrap();
        assert!((d.log_density(&Value::Vector(x)).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Distribution::Gamma {
            shape: -1.0,
            rate: 1.0
        }
        .log_density(&Value::Scalar(1.0))
        .is_err());
        assert!(Distribution::Wishart {
            df: 0.5,
            scale: Matrix::identity(2, 2)
        }
        .log_density(&Value::Matrix(Matrix::identity(2, 2)))
        .is_err());
        assert!(Distribution::Normal {
            mean: 0.0,
            sd: -1.0
        }
        .sample(&mut RngStream::new(0, 0))
        .is_err());
    }

    #[test]
    fn degenerate_normal_returns_mean() {
        let d = Distribution::Normal { mean: 5.0, sd: 0.0 };
        let mut rng = RngStream::new(1, 1);
        for _ in 0..10 {
            assert_eq!(d.sample(&mut rng).unwrap(), Value::Scalar(5.0));
        }
    }

    #[test]
    fn gamma_sample_mean() {
        let mut rng = RngStream::new(2, 0);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| gamma_sample(2.0, 3.0, &mut rng))
            .collect();
        let (m, se) = moments(&draws);
        assert!((m - 2.0 / 3.0).abs() < 3.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = RngStream::new(3, 0);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| truncated_std_normal(0.0, f64::INFINITY, &mut rng))
            .collect();
        let (m, se) = moments(&draws);
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (m - want).abs() < 3.0 * se,
            "mean {m}, want {want}, se {se}"
        );
    }

    #[test]
    fn far_tail_truncation_mean() {
        // E[Z | Z > a] = φ(a)/(1-Φ(a)).
        let a = 6.0;
        let mut rng = RngStream::new(4, 0);
        let draws: Vec<f64> = (0..200_000)
            .map(|_| truncated_std_normal(a, f64::INFINITY, &mut rng))
            .collect();
        let (m, se) = moments(&draws);
        let want = crate::numkit::special::inv_mills(-a);
        assert!((m - want).abs() < 3.0 * se, "mean {m}, want {want}");
        assert!(draws.iter().all(|&z| z > a));
    }

    #[test]
    fn upper_truncation_mirrors_lower() {
        let mut rng = RngStream::new(5, 0);
        let draws: Vec<f64> = (0..200_000)
            .map(|_| truncated_std_normal(f64::NEG_INFINITY, -1.0, &mut rng))
            .collect();
        let (m, se) = moments(&draws);
        let want = -crate::numkit::special::inv_mills(-1.0);
        assert!((m - want).abs() < 3.0 * se);
    }

    #[test]
    fn wishart_sample_mean_is_df_times_scale() {
        let scale = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let chol = Cholesky::new(&scale).unwrap();
        let mut rng = RngStream::new(6, 0);
        let n = 200_000;
        let mut acc = Matrix::zeros(2, 2);
        for _ in 0..n {
            acc += wishart_sample(4.0, &chol, &mut rng);
        }
        acc /= n as f64;
        let want = scale * 4.0;
        assert!((acc - want).abs().max() < 0.03);
    }

    #[test]
    fn truncated_density_normalizes() {
        let d = Distribution::TruncatedNormal {
            mean: 1.0,
            sd: 2.0,
            lower: 0.0,
            upper: 3.0,
        };
        let n = 20_000;
        let h = 3.0 / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                d.log_density(&Value::Scalar(x)).unwrap().exp() * h
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-7);
    }
}
