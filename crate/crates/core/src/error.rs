//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied data failed (sizes, ordering, ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The dense eigensolver backend reported a failure; this signals a
    /// library/environment fault rather than bad physics input.
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    /// An operator expected to be unitary is not (eigenvalue moduli drift).
    #[error("non-unitary operator: max | |lambda| - 1 | = {residual:.3e}")]
    NonUnitary { residual: f64 },

    /// Requested parity sector is not defined for these quantum numbers.
    #[error("parity sector unavailable: {0}")]
    ParitySector(String),

    /// Hilbert-space dimension exceeds the configured safety cap.
    #[error("sector dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    /// Energy window selected no levels.
    #[error("empty energy shell [{lo:.6}, {hi:.6}]: {hint}")]
    EmptyShell { lo: f64, hi: f64, hint: String },

    /// Trajectory reached the |P| -> 1 coordinate singularity.
    #[error("coordinate pole hit at t = {t:.6e} (|P| = {p_abs:.12})")]
    PoleHit { t: f64, p_abs: f64 },

    /// Adaptive integrator could not proceed.
    #[error("ODE step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    /// Adaptive integrator exceeded its step budget.
    #[error("ODE step budget {max_steps} exhausted at t = {t:.6e}")]
    StepBudget { t: f64, max_steps: usize },

    /// Energy-shell sampling found (almost) no accessible phase-space area.
    #[error("degenerate shell at energy {energy:.6}: accessible fraction {fraction:.3e}")]
    DegenerateShell { energy: f64, fraction: f64 },

    /// A phase-space point fell outside the cell-grid domain.
    #[error("point ({u:.6}, {v:.6}) outside domain {domain}")]
    OutsideDomain { u: f64, v: f64, domain: String },

    /// Cell grid has no admissible cells.
    #[error("no admissible cells in grid for domain {0}")]
    EmptyAdmissible(String),

    /// Curve fit could not run (too few points, nonpositive abscissae).
    #[error("fit precondition failed: {0}")]
    FitInput(String),
}
