//! Dense symmetric matrices: semidefinite Cholesky and Jacobi eigenvalues.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Lower-triangular factor `L` with `A = L L^T` for a positive semidefinite
/// row-major `n x n` matrix. Pivots within `tol * max|diag|` of zero give
/// zero columns; more negative pivots are an error.
pub fn semidefinite_cholesky(a: &[f64], n: usize, tol: f64) -> Result<Vec<f64>> {
    if a.len() != n * n {
        bail!(Argument, "matrix has {} entries, expected {}", a.len(), n * n);
    }
    let scale = (0..n).map(|i| libm::fabs(a[i * n + i])).fold(0.0, f64::max);
    let eps = tol * scale.max(f64::MIN_POSITIVE);
    let mut l = alloc::vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -eps {
            bail!(Numeric, "matrix is not positive semidefinite: pivot {d:e} at row {j}");
        }
        if d <= eps {
            continue;
        }
        let s = libm::sqrt(d);
        l[j * n + j] = s;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / s;
        }
    }
    Ok(l)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        bail!(Argument, "matrix has {} entries, expected {}", a.len(), n * n);
    }
    let mut m = a.to_vec();
    let norm: f64 = m.iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i * n + j] * m[i * n + j];
                }
            }
        }
        if off <= 1e-30 * norm.max(f64::MIN_POSITIVE) {
            let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
            ev.sort_by(f64::total_cmp);
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    bail!(Numeric, "Jacobi iteration did not converge for n = {n}")
}
