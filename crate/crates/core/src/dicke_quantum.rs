//! Dicke Hamiltonian on the truncated even-parity boson (x) spin basis,
//! scaled energy spectra, and the working energy shell.
//!
//! `H = omega a^dag a + omega0 Jz + (2 xi / sqrt(N)) (a + a^dag) Jx` with
//! `j = N/2`. Parity `(-1)^(j + Jz + a^dag a)` is conserved, so the matrix is
//! assembled directly on the even sector using the ladder elements of the
//! factor operators; the full Kronecker product never needs to be formed at
//! production sizes (the small-basis product route exists in `spin_ops` and
//! the equivalence of the two is oracle-tested).
//!
//! Energies are compared with the classical limit through `E_k = eps_k / j`,
//! the same scaling that makes the coherent-state expectation of `H/j` equal
//! the classical Hamiltonian. Truncation quality is certified by rebuilding
//! with a larger boson cutoff and checking rank-matched shell levels.

use ndarray::prelude::*;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral_stats::{Provenance, SpectrumSample};
use crate::spin_ops::{BasisTag, OperatorMatrix, Parity};

/// Default cap on the even-sector dimension.
pub const DEFAULT_DIM_CAP: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DickeParams {
    /// Number of two-level atoms, even; `j = n_atoms / 2`.
    pub n_atoms: u32,
    pub omega: f64,
    pub omega0: f64,
    pub xi: f64,
    /// Boson occupation cutoff (Fock dimension is `n_tr + 1`).
    pub n_tr: usize,
}

impl DickeParams {
    pub fn new(n_atoms: u32, omega: f64, omega0: f64, xi: f64, n_tr: usize) -> Result<Self> {
        if n_atoms == 0 || n_atoms % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "n_atoms must be positive and even, got {n_atoms}"
            )));
        }
        if !(omega > 0.0) || !(omega0 > 0.0) {
            return Err(Error::InvalidInput("frequencies must be positive".into()));
        }
        if !(xi >= 0.0) {
            return Err(Error::InvalidInput("xi must be >= 0".into()));
        }
        if n_tr < 1 {
            return Err(Error::InvalidInput("n_tr must be >= 1".into()));
        }
        Ok(Self {
            n_atoms,
            omega,
            omega0,
            xi,
            n_tr,
        })
    }

    pub fn j(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    /// Even-sector states as `(n, i)` pairs (`i = j + m`), boson-major.
    fn even_states(&self) -> Vec<(usize, usize)> {
        let spin_dim = self.n_atoms as usize + 1;
        let mut out = Vec::new();
        for n in 0..=self.n_tr {
            for i in 0..spin_dim {
                if (n + i) % 2 == 0 {
                    out.push((n, i));
                }
            }
        }
        out
    }

    pub fn even_dim(&self) -> usize {
        self.even_states().len()
    }
}

/// Even-sector Hamiltonian with the default dimension cap.
pub fn build_dicke_hamiltonian(params: &DickeParams) -> Result<OperatorMatrix> {
    build_dicke_hamiltonian_capped(params, DEFAULT_DIM_CAP)
}

/// Even-sector Hamiltonian, rejecting sector dimensions above `cap`.
pub fn build_dicke_hamiltonian_capped(
    params: &DickeParams,
    cap: usize,
) -> Result<OperatorMatrix> {
    let states = params.even_states();
    let dim = states.len();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let spin_dim = params.n_atoms as usize + 1;
    let j = params.j();
    let coupling = 2.0 * params.xi / (params.n_atoms as f64).sqrt();

    // rank lookup: full product index -> sector rank
    let mut rank = vec![usize::MAX; (params.n_tr + 1) * spin_dim];
    for (r, &(n, i)) in states.iter().enumerate() {
        rank[n * spin_dim + i] = r;
    }

    // <i+1|Jx|i> = c(m)/2 with m = -j + i
    let jx_up = |i: usize| {
        let m = -j + i as f64;
        0.5 * (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    };

    let mut h = Array2::<Complex64>::zeros((dim, dim));
    for (r, &(n, i)) in states.iter().enumerate() {
        let m = -j + i as f64;
        h[[r, r]] = Complex64::new(params.omega * n as f64 + params.omega0 * m, 0.0);
        // (a + a^dag) Jx couples (n, i) -> (n +- 1, i +- 1)
        let mut couple = |n2: isize, i2: isize, boson: f64, spin: f64| {
            if n2 < 0 || i2 < 0 {
                return;
            }
            let (n2, i2) = (n2 as usize, i2 as usize);
            if n2 > params.n_tr || i2 >= spin_dim {
                return;
            }
            let c = rank[n2 * spin_dim + i2];
            debug_assert_ne!(c, usize::MAX, "coupling leaves the parity sector");
            h[[c, r]] = Complex64::new(coupling * boson * spin, 0.0);
        };
        let n_f = n as f64;
        // <n+1|a^dag|n> = sqrt(n+1), <n-1|a|n> = sqrt(n)
        couple(n as isize + 1, i as isize + 1, (n_f + 1.0).sqrt(), jx_up(i));
        couple(
            n as isize + 1,
            i as isize - 1,
            (n_f + 1.0).sqrt(),
            if i > 0 { jx_up(i - 1) } else { 0.0 },
        );
        couple(n as isize - 1, i as isize + 1, n_f.sqrt(), jx_up(i));
        couple(
            n as isize - 1,
            i as isize - 1,
            n_f.sqrt(),
            if i > 0 { jx_up(i - 1) } else { 0.0 },
        );
    }

    OperatorMatrix::hermitian(
        h,
        BasisTag::BosonSpin {
            two_j: params.n_atoms,
            n_tr: params.n_tr,
            sector: Some(Parity::Even),
        },
    )
}

/// Eigenvalues of `h` divided by `j`, ascending. Real-symmetric input drops
/// to the faster real solver automatically.
pub fn scaled_spectrum(h: &OperatorMatrix, j: f64) -> Result<SpectrumSample> {
    if !h.is_hermitian() {
        return Err(Error::InvalidInput(
            "scaled_spectrum expects a Hermitian operator".into(),
        ));
    }
    let eigs = match h.real_entries() {
        Some(re) => linalg::eigvalsh_real(&re)?,
        None => linalg::eigvalsh_complex(h.entries())?,
    };
    let levels: Vec<f64> = eigs.iter().map(|e| e / j).collect();
    Ok(SpectrumSample::new(
        levels,
        Provenance::Synthetic(format!("{}", h.basis_tag())),
    ))
}

/// Contiguous slice of scaled levels inside
/// `[e_center - lo_offset, e_center + hi_offset]`.
#[derive(Clone, Debug)]
pub struct EnergyShell {
    pub e_center: f64,
    pub lo: f64,
    pub hi: f64,
    pub levels: Vec<f64>,
}

impl EnergyShell {
    pub fn count(&self) -> usize {
        self.levels.len()
    }
}

pub fn select_shell(
    spec: &SpectrumSample,
    e_center: f64,
    lo_offset: f64,
    hi_offset: f64,
) -> Result<EnergyShell> {
    let lo = e_center - lo_offset;
    let hi = e_center + hi_offset;
    let levels = &spec.levels;
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("spectrum must be sorted".into()));
    }
    let a = levels.partition_point(|&x| x < lo);
    let b = levels.partition_point(|&x| x <= hi);
    if a >= b {
        return Err(Error::EmptyShell {
            lo,
            hi,
            hint: "no levels in window; increase N or widen the shell".into(),
        });
    }
    Ok(EnergyShell {
        e_center,
        lo,
        hi,
        levels: levels[a..b].to_vec(),
    })
}

/// Result of rebuilding with a larger boson cutoff.
#[derive(Clone, Debug)]
pub struct TruncationReport {
    pub n_tr: (usize, usize),
    pub shell_counts: (usize, usize),
    /// Shell counts agree between the two cutoffs.
    pub size_match: bool,
    /// Max |E_k - E_k'| over rank-matched shell levels.
    pub max_shift: f64,
}

impl TruncationReport {
    pub fn converged(&self, tol: f64) -> bool {
        self.size_match && self.max_shift < tol
    }
}

/// Rebuild with `n_tr' = ceil(factor * n_tr)` and compare shell levels
/// rank by rank.
pub fn truncation_convergence(
    params: &DickeParams,
    e_center: f64,
    lo_offset: f64,
    hi_offset: f64,
    n_tr_factor: f64,
) -> Result<TruncationReport> {
    truncation_convergence_capped(params, e_center, lo_offset, hi_offset, n_tr_factor, DEFAULT_DIM_CAP)
}

pub fn truncation_convergence_capped(
    params: &DickeParams,
    e_center: f64,
    lo_offset: f64,
    hi_offset: f64,
    n_tr_factor: f64,
    cap: usize,
) -> Result<TruncationReport> {
    if !(n_tr_factor > 1.0) {
        return Err(Error::InvalidInput(
            "truncation check needs n_tr_factor > 1".into(),
        ));
    }
    let n_tr2 = (n_tr_factor * params.n_tr as f64).ceil() as usize;
    let mut params2 = *params;
    params2.n_tr = n_tr2;

    let shell_of = |p: &DickeParams| -> Result<EnergyShell> {
        let h = build_dicke_hamiltonian_capped(p, cap)?;
        let spec = scaled_spectrum(&h, p.j())?;
        select_shell(&spec, e_center, lo_offset, hi_offset)
    };
    let s1 = shell_of(params)?;
    let s2 = shell_of(&params2)?;

    let matched = s1.count().min(s2.count());
    let max_shift = s1.levels[..matched]
        .iter()
        .zip(&s2.levels[..matched])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(TruncationReport {
        n_tr: (params.n_tr, n_tr2),
        shell_counts: (s1.count(), s2.count()),
        size_match: s1.count() == s2.count(),
        max_shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(n_atoms: u32, xi: f64, n_tr: usize) -> DickeParams {
        DickeParams::new(n_atoms, 1.0, 1.0, xi, n_tr).unwrap()
    }

    #[test]
    fn validation() {
        assert!(DickeParams::new(3, 1.0, 1.0, 0.5, 10).is_err());
        assert!(DickeParams::new(0, 1.0, 1.0, 0.5, 10).is_err());
        assert!(DickeParams::new(4, 0.0, 1.0, 0.5, 10).is_err());
        assert!(DickeParams::new(4, 1.0, 1.0, -0.5, 10).is_err());
        assert!(DickeParams::new(4, 1.0, 1.0, 0.5, 0).is_err());
    }

    #[test]
    fn sector_dimension_formula() {
        // (N/2 + 1)(n_tr + 1) - n_tr/2 for even n_tr
        for (n, n_tr) in [(2u32, 2usize), (4, 6), (30, 160)] {
            let p = params(n, 1.0, n_tr);
            let expect = (n as usize / 2 + 1) * (n_tr + 1) - n_tr / 2;
            assert_eq!(p.even_dim(), expect);
        }
    }

    #[test]
    fn dimension_cap_guard() {
        let p = params(30, 1.0, 160); // sector dim 2496
        assert!(matches!(
            build_dicke_hamiltonian_capped(&p, 1000),
            Err(Error::DimensionCap { dim: 2496, cap: 1000 })
        ));
    }

    #[test]
    fn decoupled_spectrum_is_exact() {
        // xi = 0: eigenvalues are exactly {omega n + omega0 m} on the even
        // sector (the matrix is diagonal)
        let p = DickeParams::new(4, 1.0, 0.7, 0.0, 6).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        let spec = scaled_spectrum(&h, p.j()).unwrap();
        let mut expect: Vec<f64> = p
            .even_states()
            .iter()
            .map(|&(n, i)| (1.0 * n as f64 + 0.7 * (-p.j() + i as f64)) / p.j())
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(spec.levels.len(), expect.len());
        for (got, want) in spec.levels.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermiticity_of_assembled_matrix() {
        let p = DickeParams::new(8, 1.0, 0.9, 1.3, 24).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        assert!(h.hermiticity_residual() < 1e-12);
        // purely real in this basis
        assert!(h.real_entries().is_some());
    }

    #[test]
    fn even_sector_matches_full_space_oracle() {
        // N = 2, n_tr = 2: diagonalize the full 9x9 built from the generic
        // product-operator route, classify eigenvectors by parity expectation,
        // and compare the even ones with the direct sector build.
        use crate::spin_ops::{
            build_boson_ops, build_jx, build_jz, product_operator, SpinBasis,
        };
        let p = DickeParams::new(2, 1.0, 0.9, 0.7, 2).unwrap();
        let spin = SpinBasis::new(p.n_atoms);
        let (a, adag) = build_boson_ops(p.n_tr).unwrap();
        let apad = OperatorMatrix::hermitian(
            a.entries() + adag.entries(),
            a.basis_tag().clone(),
        )
        .unwrap();
        let num = OperatorMatrix::hermitian(
            adag.entries().dot(a.entries()),
            a.basis_tag().clone(),
        )
        .unwrap();
        let eye_boson = OperatorMatrix::hermitian(
            Array2::from_diag(&Array1::from_elem(p.n_tr + 1, Complex64::new(1.0, 0.0))),
            a.basis_tag().clone(),
        )
        .unwrap();
        let eye_spin = OperatorMatrix::hermitian(
            Array2::from_diag(&Array1::from_elem(spin.dim(), Complex64::new(1.0, 0.0))),
            build_jz(&spin).basis_tag().clone(),
        )
        .unwrap();
        let coupling = 2.0 * p.xi / (p.n_atoms as f64).sqrt();
        let full = product_operator(&num, &eye_spin)
            .unwrap()
            .into_entries()
            .mapv(|z| z * p.omega)
            + product_operator(&eye_boson, &build_jz(&spin))
                .unwrap()
                .into_entries()
                .mapv(|z| z * p.omega0)
            + product_operator(&apad, &build_jx(&spin))
                .unwrap()
                .into_entries()
                .mapv(|z| z * coupling);
        assert_eq!(full.nrows(), 9);

        // parity of product state (n, i) is (-1)^(n + i)
        let spin_dim = spin.dim();
        let parity_sign =
            |idx: usize| if ((idx / spin_dim) + (idx % spin_dim)) % 2 == 0 { 1.0 } else { -1.0 };
        let (vals, vecs) = linalg::eigh_complex(&full).unwrap();
        let mut even_vals = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            let mut expect = 0.0;
            for idx in 0..9 {
                expect += parity_sign(idx) * vecs[[idx, k]].norm_sqr();
            }
            assert!(
                expect.abs() > 0.999,
                "eigenvector {k} is not a parity eigenstate (<Pi> = {expect})"
            );
            if expect > 0.0 {
                even_vals.push(v);
            }
        }
        even_vals.sort_by(|x, y| x.partial_cmp(y).unwrap());

        let h = build_dicke_hamiltonian(&p).unwrap();
        let sector = scaled_spectrum(&h, 1.0).unwrap(); // j = 1 -> unscaled
        assert_eq!(even_vals.len(), sector.levels.len());
        for (a, b) in even_vals.iter().zip(sector.levels.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn spectrum_count_and_shift() {
        let p = DickeParams::new(6, 1.0, 0.8, 0.6, 12).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        let spec = scaled_spectrum(&h, p.j()).unwrap();
        assert_eq!(spec.levels.len(), p.even_dim());

        // adding c * I shifts scaled levels by c / j
        let c = 0.37;
        let shifted = {
            let mut e = h.entries().clone();
            for i in 0..e.nrows() {
                e[[i, i]] += Complex64::new(c, 0.0);
            }
            OperatorMatrix::hermitian(e, h.basis_tag().clone()).unwrap()
        };
        let spec2 = scaled_spectrum(&shifted, p.j()).unwrap();
        for (a, b) in spec.levels.iter().zip(spec2.levels.iter()) {
            assert_abs_diff_eq!(b - a, c / p.j(), epsilon = 1e-10);
        }
    }

    #[test]
    fn eigenvector_orthonormality_when_requested() {
        let p = DickeParams::new(6, 1.0, 0.9, 0.8, 10).unwrap();
        let h = build_dicke_hamiltonian(&p).unwrap();
        let (_, vecs) = linalg::eigh_complex(h.entries()).unwrap();
        let g = vecs.t().mapv(|z| z.conj()).dot(&vecs);
        let mut worst = 0.0f64;
        for i in 0..g.nrows() {
            for k in 0..g.ncols() {
                let target = if i == k { 1.0 } else { 0.0 };
                worst = worst.max((g[[i, k]] - Complex64::new(target, 0.0)).norm());
            }
        }
        assert!(worst < 1e-8, "orthonormality residual {worst:.3e}");
    }

    #[test]
    fn shell_window_and_errors() {
        let spec = SpectrumSample::synthetic(vec![0.1, 0.5, 1.0, 1.1, 1.15, 1.21, 1.4]);
        let shell = select_shell(&spec, 1.2, 0.15, 0.02).unwrap();
        assert_abs_diff_eq!(shell.lo, 1.05);
        assert_abs_diff_eq!(shell.hi, 1.22);
        assert_eq!(shell.levels, vec![1.1, 1.15, 1.21]);

        let low = SpectrumSample::synthetic(vec![0.1, 0.2, 0.3]);
        assert!(matches!(
            select_shell(&low, 1.2, 0.15, 0.02),
            Err(Error::EmptyShell { .. })
        ));
    }

    #[test]
    fn shell_count_grows_with_system_size() {
        let mut counts = Vec::new();
        for n in [8u32, 12, 16] {
            let p = DickeParams::new(n, 1.0, 1.0, 1.0, 40).unwrap();
            let h = build_dicke_hamiltonian(&p).unwrap();
            let spec = scaled_spectrum(&h, p.j()).unwrap();
            let shell = select_shell(&spec, 1.2, 0.15, 0.02).unwrap();
            counts.push(shell.count());
        }
        assert!(
            counts.windows(2).all(|w| w[1] >= w[0]),
            "shell counts not monotone: {counts:?}"
        );
    }

    #[test]
    fn truncation_convergence_decoupled_is_exact() {
        // window widened so the sparse decoupled spectrum has levels in it
        let p = DickeParams::new(4, 1.0, 1.0, 0.0, 8).unwrap();
        let rep = truncation_convergence(&p, 1.2, 0.7, 0.05, 1.25).unwrap();
        assert!(rep.size_match);
        assert_abs_diff_eq!(rep.max_shift, 0.0);
    }

    #[test]
    fn gross_undertruncation_is_flagged() {
        let p = DickeParams::new(8, 1.0, 1.0, 1.0, 6).unwrap();
        let rep = truncation_convergence(&p, 1.2, 0.15, 0.02, 1.5).unwrap();
        assert!(
            !rep.converged(1e-6),
            "undersized cutoff reported converged: {rep:?}"
        );
    }

    #[test]
    fn shell_levels_variational_in_cutoff() {
        // growing the Fock space can only lower rank-matched eigenvalues
        let p1 = DickeParams::new(6, 1.0, 1.0, 0.8, 20).unwrap();
        let p2 = DickeParams::new(6, 1.0, 1.0, 0.8, 26).unwrap();
        let s1 = scaled_spectrum(&build_dicke_hamiltonian(&p1).unwrap(), p1.j()).unwrap();
        let s2 = scaled_spectrum(&build_dicke_hamiltonian(&p2).unwrap(), p2.j()).unwrap();
        for (a, b) in s1.levels.iter().zip(s2.levels.iter()) {
            assert!(*b <= *a + 1e-12, "rank eigenvalue rose: {b} > {a}");
        }
    }
}
