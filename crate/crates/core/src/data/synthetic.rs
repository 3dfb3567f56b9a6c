use super::Dataset;
use crate::error::{Error, Result};
use crate::numkit::dist::std_normal;
use crate::numkit::special::norm_cdf;
use crate::numkit::{Matrix, RngStream};

/// Coefficients `[β₀, β₁, …, β_p]` of the synthetic probit data:
/// intercept 0.25, slopes `0.5·(−1)^(j+1)/√j`.
pub fn bernoulli_true_beta(p: usize) -> Vec<f64> {
    std::iter::once(0.25)
        .chain((1..=p).map(|j| 0.5 * if j % 2 == 1 { 1.0 } else { -1.0 } / (j as f64).sqrt()))
        .collect()
}

/// Coefficients of the synthetic Gaussian regression: intercept 2,
/// slopes `(−1)^(j+1)·(1.2 − 0.1j)`.
pub fn gaussian_true_beta(p: usize) -> Vec<f64> {
    std::iter::once(2.0)
        .chain((1..=p).map(|j| if j % 2 == 1 { 1.0 } else { -1.0 } * (1.2 - 0.1 * j as f64)))
        .collect()
}

fn covariate_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn check_n(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::data(what, "n must be at least 1"));
    }
    Ok(())
}

/// `n` rows of `p` i.i.d. N(0, 1) covariates `x1..xp` and a response `y`
/// drawn from the probit model with [`bernoulli_true_beta`].
pub fn make_bernoulli_synthetic(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    check_n(n, "bernoulli-synthetic")?;
    let beta = bernoulli_true_beta(p);
    let mut rng = RngStream::new(seed, 0);
    let mut data = Matrix::zeros(n, p + 1);
    for i in 0..n {
        let mut eta = beta[0];
        for j in 1..=p {
            let x = std_normal(&mut rng);
            data[(i, j)] = x;
            eta += beta[j] * x;
        }
        data[(i, 0)] = if rng.uniform() < norm_cdf(eta) {
            1.0
        } else {
            0.0
        };
    }
    let mut columns = vec!["y".to_string()];
    columns.extend(covariate_names(p));
    Dataset::new(
        format!("bernoulli-synthetic-n{n}-p{p}-seed{seed}"),
        columns,
        data,
        "synthetic probit data",
    )
}

/// `n` rows of `p` i.i.d. N(0, 1) covariates and `y = Xβ + ε`, ε ~ N(0, 1),
/// with β from [`gaussian_true_beta`].
pub fn make_gaussian_synthetic(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    check_n(n, "gaussian-synthetic")?;
    let beta = gaussian_true_beta(p);
    let mut rng = RngStream::new(seed, 0);
    let mut data = Matrix::zeros(n, p + 1);
    for i in 0..n {
        let mut mu = beta[0];
        for j in 1..=p {
            let x = std_normal(&mut rng);
            data[(i, j)] = x;
            mu += beta[j] * x;
        }
        data[(i, 0)] = mu + std_normal(&mut rng);
    }
    let mut columns = vec!["y".to_string()];
    columns.extend(covariate_names(p));
    Dataset::new(
        format!("gaussian-synthetic-n{n}-p{p}-seed{seed}"),
        columns,
        data,
        "synthetic gaussian regression data",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = make_bernoulli_synthetic(300, 11, 9).unwrap();
        let b = make_bernoulli_synthetic(300, 11, 9).unwrap();
        let c = make_bernoulli_synthetic(300, 11, 10).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
        assert_eq!(a.columns.len(), 12);
        assert_eq!(bernoulli_true_beta(11).len(), 12);
    }

    #[test]
    fn response_rate_matches_probit() {
        let p = 11;
        let ds = make_bernoulli_synthetic(2000, p, 3).unwrap();
        let beta = bernoulli_true_beta(p);
        let n = ds.n_rows();
        let mut expected = 0.0;
        let mut var = 0.0;
        for i in 0..n {
            let eta = beta[0] + (1..=p).map(|j| beta[j] * ds.data[(i, j)]).sum::<f64>();
            let q = norm_cdf(eta);
            expected += q;
            var += q * (1.0 - q);
        }
        let observed: f64 = ds.column("y").unwrap().sum();
        assert!((observed - expected).abs() < 3.0 * var.sqrt());
    }

    #[test]
    fn gaussian_shape() {
        let ds = make_gaussian_synthetic(47, 8, 1).unwrap();
        assert_eq!((ds.n_rows(), ds.columns.len()), (47, 9));
        assert!(make_gaussian_synthetic(0, 8, 1).is_err());
    }
}
