//! LU factorization with partial pivoting.

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Packed LU factors of a square matrix, P*A = L*U.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> LuFactors<T> {
    /// Factor with partial pivoting. A pivot counts as singular when its
    /// magnitude falls below `1e-14 * norm_inf(a)` (floored at machine
    /// epsilon for narrower scalar types).
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows();
        let threshold = T::c(1e-14).max(T::epsilon()) * a.norm_inf();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();

        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val < threshold || pivot_val == T::zero() {
                return Err(Error::SingularMatrix(format!(
                    "pivot {:.3e} below threshold at column {k}",
                    pivot_val.as_f64()
                )));
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let delta = factor * lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - delta;
                }
            }
        }
        Ok(LuFactors { lu, perm, sign })
    }

    /// Solve A*X = B for each column of B.
    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "right-hand side row count must match");
        let m = b.cols();
        let mut x = Matrix::zeros(n, m);
        // apply permutation
        for i in 0..n {
            for j in 0..m {
                x[(i, j)] = b[(self.perm[i], j)];
            }
        }
        // forward substitution, unit lower triangle
        for i in 1..n {
            for k in 0..i {
                let lik = self.lu[(i, k)];
                if lik == T::zero() {
                    continue;
                }
                for j in 0..m {
                    let delta = lik * x[(k, j)];
                    x[(i, j)] = x[(i, j)] - delta;
                }
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for k in i + 1..n {
                let uik = self.lu[(i, k)];
                if uik == T::zero() {
                    continue;
                }
                for j in 0..m {
                    let delta = uik * x[(k, j)];
                    x[(i, j)] = x[(i, j)] - delta;
                }
            }
            let diag = self.lu[(i, i)];
            for j in 0..m {
                x[(i, j)] = x[(i, j)] / diag;
            }
        }
        x
    }

    pub fn det(&self) -> T {
        let n = self.lu.rows();
        (0..n).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }
}

/// Solve a*x = b by LU with partial pivoting.
pub fn lu_solve<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(LuFactors::factor(a)?.solve(b))
}
