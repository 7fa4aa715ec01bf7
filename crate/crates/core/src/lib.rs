//! Chaos measures for periodically kicked spins and spin-boson systems.
//!
//! This crate computes, for the kicked-top map and the Dicke model,
//!
//! * quantum chaos indicators: quasienergy / energy-level spacing-ratio
//!   statistics and the rescaled average ratio that interpolates between
//!   Poisson (0) and Wigner-Dyson (1) behaviour, and
//! * classical chaos indicators for *finite-time* trajectories: maximal and
//!   phase-space-averaged Lyapunov exponents, and the cell-occupancy measure
//!   `R_c` evaluated on stroboscopic maps (kicked top) or Poincaré sections
//!   (Dicke flow),
//!
//! together with the machinery needed to pair the two sides over a parameter
//! sweep and fit the resulting correspondence curve `y = A - exp(-q x^kappa)`.
//!
//! The binary front-end (CSV/JSON export, subcommands, config files) lives in
//! the companion `chaosmeter-cli` crate; everything here is in-process and
//! deterministic given explicit seeds.

pub mod chaos_measure;
pub mod dicke_classical;
pub mod dicke_quantum;
pub mod error;
pub mod fit;
pub mod kt_classical;
pub mod kt_quantum;
pub mod linalg;
pub mod ode;
pub mod rng;
pub mod spectral_stats;
pub mod spin_ops;

pub use error::{Error, Result};
