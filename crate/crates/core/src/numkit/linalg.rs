use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factorizes a symmetric positive-definite matrix. Only the lower
    /// triangle of `a` is read.
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: a.ncols(),
                context: "cholesky of non-square matrix",
            });
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    minor: j + 1,
                    dim: n,
                    pivot: diag,
                });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn into_factor(self) -> Matrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &Vector) -> Vector {
        let n = self.dim();
        let mut x = b.clone();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &Vector) -> Vector {
        let n = self.dim();
        let mut x = b.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &Vector) -> Vector {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = Vector::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }

    /// `L z`: maps a standard normal vector to one with covariance `A`.
    pub fn mul_lower(&self, z: &Vector) -> Vector {
        let n = self.dim();
        let mut out = Vector::zeros(n);
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.l[(i, k)] * z[k];
            }
            out[i] = s;
        }
        out
    }

    /// Quadratic form `xᵀ A⁻¹ x`.
    pub fn inv_quad(&self, x: &Vector) -> f64 {
        self.solve_lower(x).norm_squared()
    }
}

/// Cholesky factor together with `log det A`.
pub fn chol_logdet(a: &Matrix) -> Result<(Cholesky, f64)> {
    let c = Cholesky::new(a)?;
    let ld = c.log_det();
    Ok((c, ld))
}

/// Symmetrizes in place by averaging with the transpose.
pub fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// `Aᵀ diag(w) A` for a dense `A`.
pub fn weighted_gram(a: &Matrix, w: &Vector) -> Matrix {
    let mut aw = a.clone();
    for (i, mut row) in aw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    a.transpose() * aw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    fn random_spd(n: usize, rng: &mut RngStream) -> Matrix {
        let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        &g * g.transpose() + Matrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_has_zero_logdet() {
        let (_, ld) = chol_logdet(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn diagonal_logdet() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 9.0]));
        let (c, ld) = chol_logdet(&a).unwrap();
        assert!((ld - 36f64.ln()).abs() < 1e-15);
        assert_eq!(c.factor()[(0, 0)], 2.0);
        assert_eq!(c.factor()[(1, 1)], 3.0);
    }

    #[test]
    fn logdet_matches_eigenvalue_oracle() {
        let mut rng = RngStream::new(11, 0);
        for n in [1, 2, 5, 13, 50] {
            let a = random_spd(n, &mut rng);
            let (_, ld) = chol_logdet(&a).unwrap();
            let eig = nalgebra::SymmetricEigen::new(a.clone());
            let oracle: f64 = eig.eigenvalues.iter().map(|e| e.ln()).sum();
            assert!(close(ld, oracle, 1e-10), "n={n}: {ld} vs {oracle}");
        }
    }

    #[test]
    fn factor_reconstructs_input() {
        let mut rng = RngStream::new(3, 1);
        let a = random_spd(6, &mut rng);
        let c = Cholesky::new(&a).unwrap();
        let rec = c.factor() * c.factor().transpose();
        assert!((rec - &a).abs().max() < 1e-10);
        let b = Vector::from_fn(6, |i, _| i as f64 - 2.0);
        let x = c.solve(&b);
        assert!((&a * x - b).abs().max() < 1e-10);
        assert!((c.inverse() * &a - Matrix::identity(6, 6)).abs().max() < 1e-10);
    }

    #[test]
    fn non_spd_names_failing_minor() {
        let a = Matrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match Cholesky::new(&a) {
            Err(Error::NotPositiveDefinite { minor, dim, .. }) => {
                assert_eq!(minor, 3);
                assert_eq!(dim, 3);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn weighted_gram_matches_explicit() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = Vector::from_vec(vec![1.0, 0.5, 2.0]);
        let explicit = a.transpose() * Matrix::from_diagonal(&w) * &a;
        assert!((weighted_gram(&a, &w) - explicit).abs().max() < 1e-12);
    }
}
