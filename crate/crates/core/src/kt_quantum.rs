//! Kicked-top Floquet operator on the even-parity subspace and its
//! quasienergy spectrum.
//!
//! One period is a torsional kick about `x` followed by a precession about
//! `z`:
//!
//! ```text
//! F = exp(-i gamma/(2j) Jx^2) * exp(-i beta Jz)
//! ```
//!
//! Both factors preserve the `(-1)^(j+Jz)` parity, so everything is built
//! directly on the even sector (`j + 1` states for even `j`). The kick factor
//! is exponentiated through the eigendecomposition of the real-symmetric
//! even-sector `Jx^2`; that decomposition depends only on `(j, gamma)` through
//! the scalar prefactor, so gamma sweeps at fixed `j` stay cheap and the
//! result is unitary to machine precision.

use ndarray::prelude::*;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral_stats::{Provenance, SpectrumSample};
use crate::spin_ops::{BasisTag, OperatorMatrix, Parity};

/// Kicked-top parameters. `j` must be even (the parity bookkeeping assumes
/// it), `beta` lives in `[0, 2 pi)` and `gamma >= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KtParams {
    pub j: u32,
    pub beta: f64,
    pub gamma: f64,
}

impl KtParams {
    pub fn new(j: u32, beta: f64, gamma: f64) -> Result<Self> {
        if j == 0 || j % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "kicked top requires positive even j, got {j}"
            )));
        }
        if !(0.0..2.0 * PI).contains(&beta) {
            return Err(Error::InvalidInput(format!(
                "beta = {beta} outside [0, 2 pi)"
            )));
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} must be >= 0")));
        }
        Ok(Self { j, beta, gamma })
    }

    /// Even-sector dimension `j + 1`.
    pub fn sector_dim(&self) -> usize {
        self.j as usize + 1
    }

    /// The even-sector `m` values `-j, -j+2, ..., j`.
    pub fn even_m_values(&self) -> Vec<f64> {
        let j = self.j as f64;
        (0..self.sector_dim()).map(|k| -j + 2.0 * k as f64).collect()
    }
}

/// `<m+1|J_+|m>` ladder element.
fn ladder(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// Even-sector `Jx^2` as a real symmetric (tridiagonal) matrix.
///
/// In the full ladder basis `Jx^2` has `<m|.|m> = (c_{m-1}^2 + c_m^2)/4` and
/// `<m+2|.|m> = c_m c_{m+1} / 4` with `c_m = <m+1|J_+|m>`; restricted to the
/// even sector the `m +/- 2` couplings become nearest-neighbour.
pub fn jx_squared_even(j: u32) -> Array2<f64> {
    let jf = j as f64;
    let dim = j as usize + 1;
    let mut a = Array2::<f64>::zeros((dim, dim));
    for k in 0..dim {
        let m = -jf + 2.0 * k as f64;
        let c_down = ladder(jf, m - 1.0); // c_{m-1}
        let c_up = ladder(jf, m); // c_m
        a[[k, k]] = 0.25 * (c_down * c_down + c_up * c_up);
        if k + 1 < dim {
            let coup = 0.25 * ladder(jf, m) * ladder(jf, m + 1.0);
            a[[k, k + 1]] = coup;
            a[[k + 1, k]] = coup;
        }
    }
    a
}

/// Assemble the Floquet matrix from an even-sector `Jx^2` and the matching
/// `m` values. Split out so tests can permute the basis ordering.
pub fn floquet_from_parts(
    jx2_even: &Array2<f64>,
    m_even: &[f64],
    kick_coeff: f64,
    beta: f64,
) -> Result<Array2<Complex64>> {
    let dim = jx2_even.nrows();
    if jx2_even.ncols() != dim || m_even.len() != dim {
        return Err(Error::InvalidInput(
            "floquet parts have inconsistent dimensions".into(),
        ));
    }
    let (evals, evecs) = linalg::eigh_real(jx2_even)?;
    let v = evecs.mapv(|x| Complex64::new(x, 0.0));
    // columns scaled by exp(-i kick_coeff lambda_k)
    let mut scaled = v.clone();
    for (k, &lam) in evals.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -kick_coeff * lam);
        scaled.column_mut(k).mapv_inplace(|z| z * phase);
    }
    let kick = scaled.dot(&v.t());
    // right-multiply the diagonal precession factor: scale columns by
    // exp(-i beta m)
    let mut f = kick;
    for (k, &m) in m_even.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -beta * m);
        f.column_mut(k).mapv_inplace(|z| z * phase);
    }
    Ok(f)
}

/// One-period propagator on the even-parity sector.
pub fn build_floquet(params: &KtParams) -> Result<OperatorMatrix> {
    let jx2 = jx_squared_even(params.j);
    let kick_coeff = params.gamma / (2.0 * params.j as f64);
    let f = floquet_from_parts(&jx2, &params.even_m_values(), kick_coeff, params.beta)?;
    Ok(OperatorMatrix::general(
        f,
        BasisTag::Spin {
            two_j: 2 * params.j,
            sector: Some(Parity::Even),
        },
    ))
}

/// Eigenvalue moduli may drift at most this far from 1 before the input is
/// rejected as non-unitary.
pub const UNITARITY_REJECT: f64 = 1e-6;

/// Eigenphases `alpha_k = arg(lambda_k)` of a unitary matrix, reduced to
/// `[-pi, pi)` and sorted ascending. Degeneracies are kept as-is.
pub fn quasienergies(f: &OperatorMatrix) -> Result<Vec<f64>> {
    let eigs = linalg::eigvals_complex(f.entries())?;
    let mut worst = 0.0f64;
    for z in eigs.iter() {
        worst = worst.max((z.norm() - 1.0).abs());
    }
    if worst > UNITARITY_REJECT {
        return Err(Error::NonUnitary { residual: worst });
    }
    let mut alphas: Vec<f64> = eigs
        .iter()
        .map(|z| {
            let a = z.arg(); // principal value in (-pi, pi]
            if a == PI {
                -PI
            } else {
                a
            }
        })
        .collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(alphas)
}

/// Quasienergy spectrum of the kicked top at `params`.
#[derive(Clone, Debug)]
pub struct QuasienergySpectrum {
    pub alphas: Vec<f64>,
    pub params: KtParams,
}

impl QuasienergySpectrum {
    pub fn compute(params: KtParams) -> Result<Self> {
        let f = build_floquet(&params)?;
        let alphas = quasienergies(&f)?;
        debug_assert_eq!(alphas.len(), params.sector_dim());
        Ok(Self { alphas, params })
    }

    pub fn to_spectrum_sample(&self) -> SpectrumSample {
        SpectrumSample::new(
            self.alphas.clone(),
            Provenance::KickedTop {
                j: self.params.j,
                beta: self.params.beta,
                gamma: self.params.gamma,
            },
        )
    }
}
