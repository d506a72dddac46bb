//! Small dense helpers that nalgebra does not expose in the shape we need.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor together with its pivots `L[i][i]^2`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix. Only the lower triangle is read.
    ///
    /// Fails with the offending pivot when the matrix is not numerically positive definite.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dims(
                format!("{}x{}", a.nrows(), a.ncols()),
                "square matrix",
            ));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut pivot = a[(j, j)];
            for p in 0..j {
                pivot -= l[(j, p)] * l[(j, p)];
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::Cholesky { index: j, pivot });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn pivots(&self) -> Vec<f64> {
        self.l.diagonal().iter().map(|v| v * v).collect()
    }

    pub fn min_pivot(&self) -> f64 {
        self.pivots().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Solves `A X = B` in place, column by column.
    pub fn solve_in_place(&self, b: &mut DMatrix<f64>) {
        let n = self.l.nrows();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        for mut col in b.column_iter_mut() {
            // L y = b
            for i in 0..n {
                let mut s = col[i];
                for p in 0..i {
                    s -= self.l[(i, p)] * col[p];
                }
                col[i] = s / self.l[(i, i)];
            }
            // L^T x = y
            for i in (0..n).rev() {
                let mut s = col[i];
                for p in (i + 1)..n {
                    s -= self.l[(p, i)] * col[p];
                }
                col[i] = s / self.l[(i, i)];
            }
        }
    }
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// `‖AᵀA − I‖_F` for a matrix whose columns should be orthonormal.
pub fn orthonormality_residual(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    (gram - DMatrix::<f64>::identity(a.ncols(), a.ncols())).norm()
}
