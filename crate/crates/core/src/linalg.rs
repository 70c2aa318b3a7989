//! Dense Hermitian eigendecomposition backed by LAPACK (`zheevd`).
//!
//! Matrices are stored row-major (`ndarray` default). A Hermitian matrix
//! handed to column-major LAPACK is seen as its transpose, i.e. its complex
//! conjugate; the spectrum is unchanged and returned eigenvectors are
//! conjugated back before use.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

// The crate links BLAS/LAPACK symbols from the system OpenBLAS.
extern crate openblas_src;

/// Full spectrum of a Hermitian matrix, ascending. Optionally returns the
/// orthonormal eigenvectors as columns (column `k` pairs with eigenvalue `k`).
pub fn hermitian_eigen(
    matrix: &Array2<Complex64>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<Complex64>>)> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::ConvergenceFailure(format!(
            "matrix is {}x{}, expected square",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| Array2::zeros((0, 0)))));
    }

    let mut a: Vec<Complex64> = matrix.iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let n_i = n as i32;
    let jobz = if want_vectors { b'V' } else { b'N' } as i8;
    let uplo = b'L' as i8;
    let mut info: i32 = 0;

    // Workspace query.
    let mut work_q = [Complex64::new(0.0, 0.0)];
    let mut rwork_q = [0.0f64];
    let mut iwork_q = [0i32];
    let neg = -1i32;
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &n_i,
            a.as_mut_ptr().cast(),
            &n_i,
            w.as_mut_ptr(),
            work_q.as_mut_ptr().cast(),
            &neg,
            rwork_q.as_mut_ptr(),
            &neg,
            iwork_q.as_mut_ptr(),
            &neg,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::ConvergenceFailure(format!(
            "zheevd workspace query failed with info = {info}"
        )));
    }

    let lwork = work_q[0].re as i32;
    let lrwork = rwork_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &n_i,
            a.as_mut_ptr().cast(),
            &n_i,
            w.as_mut_ptr(),
            work.as_mut_ptr().cast(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::ConvergenceFailure(format!(
            "zheevd failed with info = {info}"
        )));
    }

    let vectors = if want_vectors {
        // LAPACK wrote eigenvectors of conj(H) column-major into `a`:
        // component i of eigenvector k sits at a[i + k*n]. Conjugate to
        // recover eigenvectors of H.
        let mut v = Array2::<Complex64>::zeros((n, n));
        for k in 0..n {
            for i in 0..n {
                v[(i, k)] = a[i + k * n].conj();
            }
        }
        Some(v)
    } else {
        None
    };

    Ok((w, vectors))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn smallest_eigenvalue(matrix: &Array2<Complex64>) -> Result<f64> {
    let (vals, _) = hermitian_eigen(matrix, false)?;
    vals.first().copied().ok_or_else(|| {
        Error::ConvergenceFailure("smallest eigenvalue of an empty matrix".into())
    })
}

/// Spectral norm (largest |eigenvalue|) of a Hermitian matrix.
pub fn spectral_norm(matrix: &Array2<Complex64>) -> Result<f64> {
    let (vals, _) = hermitian_eigen(matrix, false)?;
    Ok(vals
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs())))
}

/// Max-norm of the anti-Hermitian defect `M - M*`.
pub fn hermiticity_defect(matrix: &Array2<Complex64>) -> f64 {
    let n = matrix.nrows();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = matrix[(i, j)] - matrix[(j, i)].conj();
            defect = defect.max(d.norm());
        }
    }
    defect
}

/// Max-norm of a complex matrix.
pub fn max_norm(matrix: &Array2<Complex64>) -> f64 {
    matrix.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Conjugate-transpose product `B* D B` for a real diagonal `D`, the
/// compression of a multiplication operator to the column span of `B`.
pub fn compress_diagonal(basis: &Array2<Complex64>, diag: &Array1<f64>) -> Array2<Complex64> {
    let (n, m) = basis.dim();
    assert_eq!(n, diag.len(), "diagonal length must match basis rows");
    let mut out = Array2::<Complex64>::zeros((m, m));
    for a in 0..m {
        for b in a..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                if diag[i] != 0.0 {
                    acc += basis[(i, a)].conj() * basis[(i, b)] * diag[i];
                }
            }
            out[(a, b)] = acc;
            out[(b, a)] = acc.conj();
        }
    }
    out
}
