//! Real nonsymmetric eigenvalues: balance, Hessenberg reduction, then the
//! Francis double-shift QR iteration (real Schur form without the Schur
//! vectors). Deflation uses the subdiagonal test
//! `|h[i][i-1]| <= 1e-13 * (|h[i-1][i-1]| + |h[i][i]|)`, floored at machine
//! epsilon for narrower scalar types.

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;
use num_complex::Complex;

fn sign_of<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Parlett-Reinsch balancing (radix-2 diagonal similarity). Eigenvalues are
/// preserved exactly; row/column norms are equalized to reduce roundoff.
fn balance<T: Real>(a: &mut Matrix<T>) {
    let n = a.rows();
    let radix = T::c(2.0);
    let radix_sq = radix * radix;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in 0..n {
                if j != i {
                    c = c + a[(j, i)].abs();
                    r = r + a[(i, j)].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f = f * radix;
                c = c * radix_sq;
            }
            g = r * radix;
            while c >= g {
                f = f / radix;
                c = c / radix_sq;
            }
            if (c + r) / f < T::c(0.95) * s {
                converged = false;
                let g = T::one() / f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)] * g;
                }
                for j in 0..n {
                    a[(j, i)] = a[(j, i)] * f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Householder reduction to upper Hessenberg form (similarity transform,
/// transformation not accumulated).
fn hessenberg<T: Real>(h: &mut Matrix<T>) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![T::zero(); n];
    for k in 0..n - 2 {
        // Householder vector annihilating h[k+2.., k]
        let mut scale = T::zero();
        for i in k + 1..n {
            scale = scale + h[(i, k)].abs();
        }
        if scale == T::zero() {
            continue;
        }
        let mut norm_sq = T::zero();
        for i in k + 1..n {
            v[i] = h[(i, k)] / scale;
            norm_sq = norm_sq + v[i] * v[i];
        }
        let alpha = -sign_of(norm_sq.sqrt(), v[k + 1]);
        let vk = v[k + 1];
        v[k + 1] = vk - alpha;
        let vnorm_sq = norm_sq - vk * vk + v[k + 1] * v[k + 1];
        if vnorm_sq == T::zero() {
            continue;
        }
        let beta = T::c(2.0) / vnorm_sq;

        // H <- (I - beta v v^T) H, rows k+1..n
        for j in k..n {
            let mut dot = T::zero();
            for i in k + 1..n {
                dot = dot + v[i] * h[(i, j)];
            }
            let dot = dot * beta;
            for i in k + 1..n {
                let delta = dot * v[i];
                h[(i, j)] = h[(i, j)] - delta;
            }
        }
        // H <- H (I - beta v v^T), columns k+1..n
        for i in 0..n {
            let mut dot = T::zero();
            for j in k + 1..n {
                dot = dot + h[(i, j)] * v[j];
            }
            let dot = dot * beta;
            for j in k + 1..n {
                let delta = dot * v[j];
                h[(i, j)] = h[(i, j)] - delta;
            }
        }
        h[(k + 1, k)] = alpha * scale;
        for i in k + 2..n {
            h[(i, k)] = T::zero();
        }
    }
}

/// Eigenvalues of a real square matrix, complex-conjugate pairs adjacent
/// (positive imaginary part first), sorted by ascending |Re| then |Im|.
pub fn eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<Complex<T>>> {
    assert!(a.is_square(), "eigenvalues require a square matrix");
    let n = a.rows();
    if !a.is_finite() {
        return Err(Error::Overflow("non-finite entries in eigenvalue input".into()));
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let mut eigs = hqr(&mut h, 100 * n)?;
    eigs.sort_by(|x, y| {
        let kx = (x.re.abs(), x.im.abs());
        let ky = (y.re.abs(), y.im.abs());
        kx.partial_cmp(&ky)
            .unwrap()
            .then(y.im.partial_cmp(&x.im).unwrap())
    });
    Ok(eigs)
}

/// Double-shift QR iteration on an upper Hessenberg matrix (destroys `h`).
fn hqr<T: Real>(h: &mut Matrix<T>, max_sweeps: usize) -> Result<Vec<Complex<T>>> {
    let n = h.rows();
    let deflate = T::c(1e-13).max(T::epsilon());
    let eps = T::epsilon();

    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + h[(i, j)].abs();
        }
    }

    let mut eigs: Vec<Complex<T>> = Vec::with_capacity(n);
    let mut sweeps = 0usize;
    let mut t = T::zero(); // accumulated exceptional shift
    let mut nn = n as isize - 1;

    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nnu = nn as usize;
            // look for a single small subdiagonal element
            let mut l = nnu;
            while l >= 1 {
                let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if h[(l, l - 1)].abs() <= deflate * s {
                    h[(l, l - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }

            let mut x = h[(nnu, nnu)];
            if l == nnu {
                // one real root
                eigs.push(Complex::new(x + t, T::zero()));
                nn -= 1;
                break;
            }

            let y = h[(nnu - 1, nnu - 1)];
            let mut w = h[(nnu, nnu - 1)] * h[(nnu - 1, nnu)];
            if l == nnu - 1 {
                // a 2x2 block: two roots
                let p = T::c(0.5) * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x = x + t;
                if q >= T::zero() {
                    let z = p + sign_of(z, p);
                    let e1 = x + z;
                    let e2 = if z != T::zero() { x - w / z } else { e1 };
                    eigs.push(Complex::new(e1, T::zero()));
                    eigs.push(Complex::new(e2, T::zero()));
                } else {
                    eigs.push(Complex::new(x + p, z));
                    eigs.push(Complex::new(x + p, -z));
                }
                nn -= 2;
                break;
            }

            // no root found yet: do a QR sweep
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::NoConvergence(max_sweeps));
            }
            let mut y = y;
            if its == 10 || its == 20 {
                // exceptional shift
                t = t + x;
                for i in 0..=nnu {
                    h[(i, i)] = h[(i, i)] - x;
                }
                let s = h[(nnu, nnu - 1)].abs() + h[(nnu - 1, nnu - 2)].abs();
                x = T::c(0.75) * s;
                y = x;
                w = T::c(-0.4375) * s * s;
            }
            its += 1;

            // form shift polynomial and look for two consecutive small
            // subdiagonal elements
            let mut p;
            let mut q;
            let mut r;
            let mut m = nnu - 2;
            loop {
                let z = h[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - rr - ss;
                r = h[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == l {
                    break;
                }
                let u = h[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = z.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nnu {
                h[(i, i - 2)] = T::zero();
                if i > m + 2 {
                    h[(i, i - 3)] = T::zero();
                }
            }

            // double QR step on rows l..=nn, columns m..=nn
            for k in m..nnu {
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if k != nnu - 1 { h[(k + 2, k - 1)] } else { T::zero() };
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p = p / x;
                        q = q / x;
                        r = r / x;
                    }
                }
                let s = sign_of((p * p + q * q + r * r).sqrt(), p);
                if s == T::zero() {
                    continue;
                }
                if k == m {
                    if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                } else {
                    h[(k, k - 1)] = -s * x;
                }
                p = p + s;
                x = p / s;
                let yy = q / s;
                let z = r / s;
                q = q / p;
                r = r / p;
                // row modification
                for j in k..=nnu {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if k != nnu - 1 {
                        pp = pp + r * h[(k + 2, j)];
                        let delta = pp * z;
                        h[(k + 2, j)] = h[(k + 2, j)] - delta;
                    }
                    let d1 = pp * yy;
                    h[(k + 1, j)] = h[(k + 1, j)] - d1;
                    let d0 = pp * x;
                    h[(k, j)] = h[(k, j)] - d0;
                }
                // column modification
                let mmin = nnu.min(k + 3);
                for i in l..=mmin {
                    let mut pp = x * h[(i, k)] + yy * h[(i, k + 1)];
                    if k != nnu - 1 {
                        pp = pp + z * h[(i, k + 2)];
                        let delta = pp * r;
                        h[(i, k + 2)] = h[(i, k + 2)] - delta;
                    }
                    let d1 = pp * q;
                    h[(i, k + 1)] = h[(i, k + 1)] - d1;
                    h[(i, k)] = h[(i, k)] - pp;
                }
            }
        }
    }
    Ok(eigs)
}
