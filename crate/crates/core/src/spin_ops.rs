//! Angular-momentum and boson operators on finite bases, plus parity
//! bookkeeping.
//!
//! Conventions, fixed so that exported matrices and golden files are
//! reproducible:
//!
//! * spin states ordered by increasing `m` (from `-j` to `j`),
//! * Fock states ordered by increasing occupation `n` (from `0` to `n_tr`),
//! * product bases ordered boson-major: index `= n * (2j + 1) + (m - (-j))`.
//!
//! Truncating the boson ladder at `n_tr` leaves the canonical commutator
//! `[a, a^dagger] = 1` intact everywhere except the top Fock state, where the
//! diagonal entry is `-n_tr`. That artifact is part of the truncated-operator
//! convention and is checked, not hidden; convergence in `n_tr` is certified
//! downstream.

use ndarray::prelude::*;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance against which the `hermitian` flag of an operator is validated.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Spin-j ladder basis `|j, m>`, m increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinBasis {
    two_j: u32,
}

impl SpinBasis {
    /// Basis for total spin `j = two_j / 2`.
    pub fn new(two_j: u32) -> Self {
        Self { two_j }
    }

    /// Basis for integer `j`.
    pub fn with_integer_j(j: u32) -> Self {
        Self { two_j: 2 * j }
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// Number of states, `2j + 1`.
    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// The ordered `m` values, `-j, -j+1, ..., j`.
    pub fn m_values(&self) -> Vec<f64> {
        let j = self.j();
        (0..self.dim()).map(|i| -j + i as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

/// Which basis a matrix lives in, including an optional parity restriction.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisTag {
    /// Spin-only ladder basis.
    Spin { two_j: u32, sector: Option<Parity> },
    /// Truncated Fock basis.
    Boson { n_tr: usize },
    /// Boson (x) spin product basis, boson-major ordering.
    BosonSpin {
        two_j: u32,
        n_tr: usize,
        sector: Option<Parity>,
    },
}

impl BasisTag {
    pub fn dim(&self) -> usize {
        match self {
            BasisTag::Spin { two_j, sector } => {
                let full = *two_j as usize + 1;
                match sector {
                    None => full,
                    Some(p) => spin_parity_indices(*two_j, *p).map(|v| v.len()).unwrap_or(0),
                }
            }
            BasisTag::Boson { n_tr } => n_tr + 1,
            BasisTag::BosonSpin { two_j, n_tr, sector } => {
                let full = (*two_j as usize + 1) * (n_tr + 1);
                match sector {
                    None => full,
                    Some(p) => boson_spin_parity_indices(*two_j, *n_tr, *p)
                        .map(|v| v.len())
                        .unwrap_or(0),
                }
            }
        }
    }

    fn with_sector(&self, parity: Parity) -> BasisTag {
        match self {
            BasisTag::Spin { two_j, .. } => BasisTag::Spin {
                two_j: *two_j,
                sector: Some(parity),
            },
            BasisTag::Boson { n_tr } => BasisTag::Boson { n_tr: *n_tr },
            BasisTag::BosonSpin { two_j, n_tr, .. } => BasisTag::BosonSpin {
                two_j: *two_j,
                n_tr: *n_tr,
                sector: Some(parity),
            },
        }
    }
}

impl std::fmt::Display for BasisTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisTag::Spin { two_j, sector } => {
                write!(f, "spin(2j={two_j}")?;
                if let Some(p) = sector {
                    write!(f, ", {p}")?;
                }
                write!(f, ")")
            }
            BasisTag::Boson { n_tr } => write!(f, "boson(n_tr={n_tr})"),
            BasisTag::BosonSpin { two_j, n_tr, sector } => {
                write!(f, "boson(n_tr={n_tr})(x)spin(2j={two_j}")?;
                if let Some(p) = sector {
                    write!(f, ", {p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Dense operator in a labeled basis.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    entries: Array2<Complex64>,
    hermitian: bool,
    basis_tag: BasisTag,
}

impl OperatorMatrix {
    /// Wrap a matrix claimed Hermitian; the claim is checked against
    /// [`HERMITICITY_TOL`].
    pub fn hermitian(entries: Array2<Complex64>, basis_tag: BasisTag) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidInput(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let residual = linalg::hermiticity_residual(&entries);
        if residual > HERMITICITY_TOL {
            return Err(Error::InvalidInput(format!(
                "hermiticity residual {residual:.3e} exceeds {HERMITICITY_TOL:.0e}"
            )));
        }
        Ok(Self {
            entries,
            hermitian: true,
            basis_tag,
        })
    }

    /// Wrap a general (non-Hermitian) matrix.
    pub fn general(entries: Array2<Complex64>, basis_tag: BasisTag) -> Self {
        Self {
            entries,
            hermitian: false,
            basis_tag,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn basis_tag(&self) -> &BasisTag {
        &self.basis_tag
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.entries)
    }

    /// Real part, provided every imaginary part is negligible (< 1e-14).
    /// Lets Hermitian solves drop to the real-symmetric fast path.
    pub fn real_entries(&self) -> Option<Array2<f64>> {
        if linalg::max_imag(&self.entries) < 1e-14 {
            Some(self.entries.mapv(|z| z.re))
        } else {
            None
        }
    }

    /// Matrix product `self * rhs` (general, keeps no Hermiticity claim).
    pub fn matmul(&self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix::general(self.entries.dot(&rhs.entries), self.basis_tag.clone())
    }
}

/// `J_z`: diagonal with entries `m`.
pub fn build_jz(basis: &SpinBasis) -> OperatorMatrix {
    let d = basis.dim();
    let mut m = Array2::<Complex64>::zeros((d, d));
    for (i, mv) in basis.m_values().iter().enumerate() {
        m[[i, i]] = Complex64::new(*mv, 0.0);
    }
    OperatorMatrix {
        entries: m,
        hermitian: true,
        basis_tag: BasisTag::Spin {
            two_j: basis.two_j(),
            sector: None,
        },
    }
}

/// Ladder element `<m+1| J_+ |m> = sqrt(j(j+1) - m(m+1))`.
fn ladder_up(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// `J_x = (J_+ + J_-)/2`: real symmetric tridiagonal.
pub fn build_jx(basis: &SpinBasis) -> OperatorMatrix {
    let d = basis.dim();
    let j = basis.j();
    let ms = basis.m_values();
    let mut m = Array2::<Complex64>::zeros((d, d));
    for i in 0..d - 1 {
        let c = 0.5 * ladder_up(j, ms[i]);
        m[[i + 1, i]] = Complex64::new(c, 0.0);
        m[[i, i + 1]] = Complex64::new(c, 0.0);
    }
    OperatorMatrix {
        entries: m,
        hermitian: true,
        basis_tag: BasisTag::Spin {
            two_j: basis.two_j(),
            sector: None,
        },
    }
}

/// `J_y = (J_+ - J_-)/(2i)`: purely imaginary tridiagonal, Hermitian.
pub fn build_jy(basis: &SpinBasis) -> OperatorMatrix {
    let d = basis.dim();
    let j = basis.j();
    let ms = basis.m_values();
    let mut m = Array2::<Complex64>::zeros((d, d));
    for i in 0..d - 1 {
        let c = 0.5 * ladder_up(j, ms[i]);
        // <m+1|Jy|m> = c/i = -i c
        m[[i + 1, i]] = Complex64::new(0.0, -c);
        m[[i, i + 1]] = Complex64::new(0.0, c);
    }
    OperatorMatrix {
        entries: m,
        hermitian: true,
        basis_tag: BasisTag::Spin {
            two_j: basis.two_j(),
            sector: None,
        },
    }
}

/// Annihilation and creation operators on the Fock space truncated at
/// occupation `n_tr` (dimension `n_tr + 1`); `a |n> = sqrt(n) |n-1>`.
pub fn build_boson_ops(n_tr: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if n_tr < 1 {
        return Err(Error::InvalidInput("boson truncation n_tr must be >= 1".into()));
    }
    let d = n_tr + 1;
    let mut a = Array2::<Complex64>::zeros((d, d));
    for n in 1..d {
        a[[n - 1, n]] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let adag = a.t().mapv(|z| z.conj());
    let tag = BasisTag::Boson { n_tr };
    Ok((
        OperatorMatrix::general(a, tag.clone()),
        OperatorMatrix::general(adag, tag),
    ))
}

/// Kronecker product `A (x) B` in boson-major ordering (`A` acts on the outer
/// index). Only defined for a Boson factor times a Spin factor.
pub fn product_operator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    let (n_tr, two_j) = match (a.basis_tag(), b.basis_tag()) {
        (BasisTag::Boson { n_tr }, BasisTag::Spin { two_j, sector: None }) => (*n_tr, *two_j),
        _ => {
            return Err(Error::InvalidInput(
                "product_operator expects (boson factor, full spin factor)".into(),
            ))
        }
    };
    let (da, db) = (a.dim(), b.dim());
    let mut out = Array2::<Complex64>::zeros((da * db, da * db));
    let ae = a.entries();
    let be = b.entries();
    for i in 0..da {
        for k in 0..da {
            let aik = ae[[i, k]];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for p in 0..db {
                for q in 0..db {
                    out[[i * db + p, k * db + q]] = aik * be[[p, q]];
                }
            }
        }
    }
    let hermitian = a.is_hermitian() && b.is_hermitian();
    let tag = BasisTag::BosonSpin {
        two_j,
        n_tr,
        sector: None,
    };
    Ok(if hermitian {
        OperatorMatrix {
            entries: out,
            hermitian: true,
            basis_tag: tag,
        }
    } else {
        OperatorMatrix::general(out, tag)
    })
}

/// Parity sector of a basis.
#[derive(Clone, Debug)]
pub struct ParitySector {
    parity: Parity,
    indices: Vec<usize>,
    full_dim: usize,
}

impl ParitySector {
    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }
}

/// Indices of the spin basis with `(-1)^(j+m)` equal to the requested sign.
///
/// Only defined for even integer `j`: the sector-dimension bookkeeping
/// (`D_even = j + 1`, `D_odd = j`) assumes it, so other `j` are rejected
/// rather than silently given a different convention.
fn spin_parity_indices(two_j: u32, parity: Parity) -> Result<Vec<usize>> {
    if two_j % 4 != 0 {
        return Err(Error::ParitySector(format!(
            "spin parity sectors require even integer j, got 2j = {two_j}"
        )));
    }
    let want = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    // m = -j + i, so j + m = i.
    Ok((0..=two_j as usize).filter(|i| i % 2 == want).collect())
}

/// Indices of the boson-major product basis with `(-1)^(j+m+n)` equal to the
/// requested sign. Requires integer `j` (even atom number).
fn boson_spin_parity_indices(two_j: u32, n_tr: usize, parity: Parity) -> Result<Vec<usize>> {
    if two_j % 2 != 0 {
        return Err(Error::ParitySector(format!(
            "product parity sectors require integer j, got 2j = {two_j}"
        )));
    }
    let want = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let spin_dim = two_j as usize + 1;
    let mut out = Vec::new();
    for n in 0..=n_tr {
        for i in 0..spin_dim {
            // j + m = i in the m-ordered basis.
            if (n + i) % 2 == want {
                out.push(n * spin_dim + i);
            }
        }
    }
    Ok(out)
}

/// Build the parity sector (index map into the full basis) for `basis_tag`.
///
/// The parity rule is fixed by the basis kind: `(-1)^(j+m)` for a spin basis,
/// `(-1)^(j+m+n)` for a boson (x) spin basis.
pub fn parity_sector(basis_tag: &BasisTag, parity: Parity) -> Result<ParitySector> {
    let (indices, full_dim) = match basis_tag {
        BasisTag::Spin { two_j, sector: None } => (
            spin_parity_indices(*two_j, parity)?,
            *two_j as usize + 1,
        ),
        BasisTag::BosonSpin {
            two_j,
            n_tr,
            sector: None,
        } => (
            boson_spin_parity_indices(*two_j, *n_tr, parity)?,
            (*two_j as usize + 1) * (n_tr + 1),
        ),
        other => {
            return Err(Error::ParitySector(format!(
                "basis {other} does not support a parity split"
            )))
        }
    };
    Ok(ParitySector {
        parity,
        indices,
        full_dim,
    })
}

/// Restrict `op` to the principal submatrix on `sector`'s indices.
pub fn project(op: &OperatorMatrix, sector: &ParitySector) -> Result<OperatorMatrix> {
    if op.dim() != sector.full_dim() {
        return Err(Error::InvalidInput(format!(
            "operator dim {} does not match sector's full basis dim {}",
            op.dim(),
            sector.full_dim()
        )));
    }
    if let Some(&bad) = sector.indices().iter().find(|&&i| i >= op.dim()) {
        return Err(Error::InvalidInput(format!(
            "sector index {bad} out of bounds for dim {}",
            op.dim()
        )));
    }
    let k = sector.len();
    let src = op.entries();
    let mut sub = Array2::<Complex64>::zeros((k, k));
    for (r, &i) in sector.indices().iter().enumerate() {
        for (c, &kk) in sector.indices().iter().enumerate() {
            sub[[r, c]] = src[[i, kk]];
        }
    }
    let tag = op.basis_tag().with_sector(sector.parity());
    Ok(if op.is_hermitian() {
        // principal submatrix of a Hermitian matrix stays Hermitian
        OperatorMatrix {
            entries: sub,
            hermitian: true,
            basis_tag: tag,
        }
    } else {
        OperatorMatrix::general(sub, tag)
    })
}
