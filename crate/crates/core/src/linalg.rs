//! Cyclic Jacobi eigenvalue solver for the small dense symmetric and
//! Hermitian matrices that appear in the entropy and Helstrom computations.

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) of a real symmetric `n×n` matrix stored row-major.
///
/// Rotations are applied in cyclic row order until the off-diagonal
/// Frobenius norm drops below `tol · max(‖A‖_F, 1e-300)`.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize, tol: f64) -> Result<Vec<f64>> {
    assert_eq!(matrix.len(), n * n, "matrix must be n×n");
    let mut a = matrix.to_vec();
    // symmetrize against round-off in the caller's assembly
    for p in 0..n {
        for q in (p + 1)..n {
            let v = 0.5 * (a[p * n + q] + a[q * n + p]);
            a[p * n + q] = v;
            a[q * n + p] = v;
        }
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let threshold = tol * scale;

    let mut residual = off_diagonal_norm(&a, n);
    let mut sweeps = 0;
    while residual > threshold {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, n, p, q);
            }
        }
        sweeps += 1;
        residual = off_diagonal_norm(&a, n);
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    Ok(eig)
}

/// Eigenvalues (ascending) of a Hermitian `n×n` matrix stored row-major.
///
/// The matrix `H = X + iY` is embedded as the real symmetric `2n×2n` block
/// matrix `[[X, -Y], [Y, X]]`, whose spectrum is that of `H` with every
/// eigenvalue doubled in multiplicity.
pub fn hermitian_eigenvalues(matrix: &[Complex64], n: usize, tol: f64) -> Result<Vec<f64>> {
    assert_eq!(matrix.len(), n * n, "matrix must be n×n");
    if matrix.iter().all(|z| z.im == 0.0) {
        let re: Vec<f64> = matrix.iter().map(|z| z.re).collect();
        return symmetric_eigenvalues(&re, n, tol);
    }
    let m = 2 * n;
    let mut real = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = matrix[i * n + j];
            real[i * m + j] = z.re;
            real[(i + n) * m + (j + n)] = z.re;
            real[i * m + (j + n)] = -z.im;
            real[(i + n) * m + j] = z.im;
        }
    }
    let doubled = symmetric_eigenvalues(&real, m, tol)?;
    Ok(doubled.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect())
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += a[p * n + q] * a[p * n + q];
        }
    }
    (2.0 * s).sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[k * n + p] = new_kp;
        a[p * n + k] = new_kp;
        a[k * n + q] = new_kq;
        a[q * n + k] = new_kq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
}
