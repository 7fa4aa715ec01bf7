//! Thin wrappers around the dense LAPACK eigensolvers.
//!
//! All heavy decompositions funnel through here so the backend and its error
//! mapping live in one place.

use ndarray::prelude::*;
use ndarray_linalg::{Eig, EigVals, Eigh, EigValsh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues and orthonormal eigenvectors of a real symmetric matrix,
/// ascending order.
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    a.eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("dsyev: {e}")))
}

/// Eigenvalues only of a real symmetric matrix, ascending order.
pub fn eigvalsh_real(a: &Array2<f64>) -> Result<Array1<f64>> {
    a.eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("dsyev(novec): {e}")))
}

/// Eigenvalues only of a complex Hermitian matrix, ascending order.
pub fn eigvalsh_complex(a: &Array2<Complex64>) -> Result<Array1<f64>> {
    a.eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("zheev(novec): {e}")))
}

/// Eigenvalues and eigenvectors of a complex Hermitian matrix.
pub fn eigh_complex(a: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    a.eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("zheev: {e}")))
}

/// Eigenvalues of a general complex matrix (unsorted, as returned by LAPACK).
pub fn eigvals_complex(a: &Array2<Complex64>) -> Result<Array1<Complex64>> {
    a.eigvals()
        .map_err(|e| Error::Eigensolver(format!("zgeev: {e}")))
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn eig_complex(a: &Array2<Complex64>) -> Result<(Array1<Complex64>, Array2<Complex64>)> {
    a.eig()
        .map_err(|e| Error::Eigensolver(format!("zgeev(vec): {e}")))
}

/// max_ij |A_ij - conj(A_ji)|
pub fn hermiticity_residual(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in i..n {
            let d = (a[[i, k]] - a[[k, i]].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// max_ij |(U^dagger U - I)_ij|
pub fn unitarity_residual(u: &Array2<Complex64>) -> f64 {
    let g = u.t().mapv(|z| z.conj()).dot(u);
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            let target = if i == k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            let d = (g[[i, k]] - target).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Largest absolute imaginary part; used to recognise real-valued operators.
pub fn max_imag(a: &Array2<Complex64>) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.im.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigh_matches_known_2x2() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = eigh_real(&a).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        // orthonormality
        let g = vecs.t().dot(&vecs);
        assert_abs_diff_eq!(g[[0, 0]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[[0, 1]], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unitarity_residual_flags_scaling() {
        let u = array![
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
        ];
        assert!(unitarity_residual(&u) < 1e-15);
        let bad = u.mapv(|z| z * 1.5);
        assert!(unitarity_residual(&bad) > 1.0);
    }
}
