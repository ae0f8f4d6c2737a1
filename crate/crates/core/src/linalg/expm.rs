//! Matrix exponential by scaling and squaring with a diagonal Pade
//! approximant of order 6, scaled so that `norm1(a / 2^k) <= 0.5`.

use super::{lu_solve, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

// coefficients of the [6/6] Pade approximant of exp
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15_840.0,
    1.0 / 665_280.0,
];

pub fn expm<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    assert!(a.is_square(), "expm requires a square matrix");
    let n = a.rows();

    let norm = a.norm_one().as_f64();
    let squarings = if norm.is_finite() && norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(T::c(0.5f64.powi(squarings as i32)));

    let c: Vec<T> = PADE6.iter().map(|&x| T::c(x)).collect();
    let ident = Matrix::identity(n);
    let a2 = scaled.matmul(&scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    // odd part U = A (c1 I + c3 A^2 + c5 A^4), even part V = c0 I + c2 A^2 + c4 A^4 + c6 A^6
    let u = scaled.matmul(&ident.scale(c[1]).add(&a2.scale(c[3])).add(&a4.scale(c[5])));
    let v = ident.scale(c[0]).add(&a2.scale(c[2])).add(&a4.scale(c[4])).add(&a6.scale(c[6]));

    let num = v.add(&u);
    let den = v.sub(&u);
    let mut result = lu_solve(&den, &num)
        .map_err(|_| Error::Overflow("Pade denominator singular in expm".into()))?;

    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if !result.is_finite() {
        return Err(Error::Overflow("non-finite entries in expm result".into()));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Pcg;

    fn assert_close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                assert!(
                    (a[(i, j)] - b[(i, j)]).abs() <= tol,
                    "entry ({i},{j}): {} vs {}",
                    a[(i, j)],
                    b[(i, j)]
                );
            }
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = Matrix::<f64>::zeros(3, 3);
        assert_close(&expm(&z).unwrap(), &Matrix::identity(3), 1e-15);
    }

    #[test]
    fn nilpotent_series_terminates() {
        let a = Matrix::<f64>::from_f64_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e = expm(&a).unwrap();
        let expected = Matrix::<f64>::from_f64_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert_close(&e, &expected, 1e-14);
    }

    #[test]
    fn rotation_closed_form() {
        let theta: f64 = 0.5;
        let a = Matrix::<f64>::from_f64_rows(&[&[0.0, -theta], &[theta, 0.0]]);
        let e = expm(&a).unwrap();
        let expected = Matrix::<f64>::from_f64_rows(&[
            &[theta.cos(), -theta.sin()],
            &[theta.sin(), theta.cos()],
        ]);
        assert_close(&e, &expected, 1e-13);
    }

    #[test]
    fn inverse_identity_property() {
        for seed in 0..8u64 {
            let mut rng = Pcg::new(50 + seed);
            let n = 2 + (seed as usize % 5);
            // scale to keep norm1 <= 5
            let raw: Matrix<f64> = Matrix::from_fn(n, n, |_, _| rng.uniform_in(-1.0, 1.0));
            let a = raw.scale(5.0 / raw.norm_one().max(5.0));
            let e = expm(&a).unwrap();
            let e_neg = expm(&a.scale(-1.0)).unwrap();
            assert_close(&e.matmul(&e_neg), &Matrix::identity(n), 1e-8);
        }
    }

    #[test]
    fn semigroup_property() {
        let mut rng = Pcg::new(99);
        let a: Matrix<f64> = Matrix::from_fn(4, 4, |_, _| rng.uniform_in(-1.0, 1.0));
        for &(s, t) in &[(0.3, 0.7), (0.5, 0.5), (1.0, 0.25)] {
            let lhs = expm(&a.scale(s + t)).unwrap();
            let rhs = expm(&a.scale(s)).unwrap().matmul(&expm(&a.scale(t)).unwrap());
            assert_close(&lhs, &rhs, 1e-8);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let a = Matrix::<f64>::from_f64_rows(&[&[1e4, 0.0], &[0.0, 1e4]]);
        match expm(&a) {
            Err(Error::Overflow(_)) => {}
            other => panic!("expected Overflow, got {other:?}"),
        }
    }

    #[test]
    fn large_norm_accuracy_diagonal() {
        // diag entries +-3: exact answer known, norm1 moderate
        let a = Matrix::<f64>::from_f64_rows(&[&[3.0, 0.0], &[0.0, -3.0]]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - 3f64.exp()).abs() <= 1e-10 * 3f64.exp());
        assert!((e[(1, 1)] - (-3f64).exp()).abs() <= 1e-12);
        assert!(e[(0, 1)].abs() < 1e-18 && e[(1, 0)].abs() < 1e-18);
    }
}
