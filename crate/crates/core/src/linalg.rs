//! Dense Cholesky factorizations for the small Gram systems of the
//! ZF receiver, the ZF channel estimator and the Newton solver.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot floor below which a Gram matrix is treated as singular.
pub(crate) const PIVOT_FLOOR: f64 = 1e-12;

/// In-place lower Cholesky factor of a symmetric positive definite
/// row-major `n×n` matrix.
pub(crate) fn cholesky(a: &mut [f64], n: usize, floor: f64) -> Result<()> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tol = floor * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > tol) {
            return Err(Error::Singular {
                dimension: j,
                size: n,
            });
        }
        let d = libm::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    Ok(())
}

pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve `A x = b` for SPD `A` (consumed).
pub(crate) fn spd_solve(mut a: Vec<f64>, n: usize, b: &mut [f64]) -> Result<()> {
    cholesky(&mut a, n, PIVOT_FLOOR)?;
    cholesky_solve(&a, n, b);
    Ok(())
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub(crate) fn hermitian_cholesky(a: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    let scale = (0..n).map(|i| a[i * n + i].re.abs()).fold(0.0, f64::max);
    let tol = PIVOT_FLOOR * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > tol) {
            return Err(Error::Singular {
                dimension: j,
                size: n,
            });
        }
        let d = libm::sqrt(d);
        l[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

pub(crate) fn hermitian_solve(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i].re;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i].conj() * b[k];
        }
        b[i] = s / l[i * n + i].re;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}
