//! Classical Dicke dynamics: Hamiltonian flow, energy-shell sampling,
//! Poincaré sections at `p = 0`, traversal times, and Lyapunov exponents.
//!
//! The mean-field limit lives on `(p, q; P, Q)` with boson quadratures
//! `(p, q)` and atomic inversion/phase `(P, Q)`:
//!
//! ```text
//! H = omega0 P + (omega/2)(p^2 + q^2) + 2 xi q cos(Q) sqrt(1 - P^2)
//! ```
//!
//! `|P| -> 1` is a coordinate singularity of the atomic chart. It is treated
//! as a hard error on accepted states rather than patched: the shells studied
//! here stay away from the poles and silent coordinate switches would mask
//! sampling mistakes. Integrator *stages* may graze `|P| >= 1`; there the
//! square roots are clamped so the step-size control backs off on its own.

#![allow(non_snake_case)]

use rand::Rng;
use rayon::prelude::*;

use crate::chaos_measure::{dicke_domain, SectionPointCloud};
use crate::error::{Error, Result};
use crate::kt_classical::LyapunovEstimate;
use crate::ode::{integrate, Dopri5Options, OdeSolution, OdeSystem};
use crate::rng::derive_rng;

/// Accepted states with `|P|` at or above `1 - POLE_TOL` abort the run.
///
/// Trajectories on the working shell do pass close to the coordinate poles
/// (separations down to ~1e-13 occur within ordinary ensemble runs), and the
/// adaptive integrator resolves those passages; only a genuine breakdown of
/// the chart — `1 - |P|` at roundoff scale — is treated as an error.
pub const POLE_TOL: f64 = 1e-15;

/// Tolerance for energy-certified integrations: holds the relative energy
/// drift below 1e-8 over `t = 3000` (measured ~2e-9). A plain 5(4) pair at
/// looser tolerances accumulates a systematic energy bias of roughly
/// `tol * n_steps`, so section-statistics work can run much looser while
/// drift-audited runs use this.
pub const ENERGY_CERTIFIED_TOL: f64 = 1e-13;

/// Crossings are refined until `|p| < CROSSING_TOL`.
pub const CROSSING_TOL: f64 = 1e-10;

/// Phase-space point `(p, q, P, Q)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DickeState {
    pub p: f64,
    pub q: f64,
    /// Atomic inversion, `|P| <= 1`.
    pub P: f64,
    /// Atomic phase, wrapped to `[-pi, pi)` on construction.
    pub Q: f64,
}

/// Wrap an angle to `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = (x + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r == std::f64::consts::PI {
        -std::f64::consts::PI
    } else {
        r
    }
}

impl DickeState {
    pub fn new(p: f64, q: f64, P: f64, Q: f64) -> Result<Self> {
        if P.abs() > 1.0 {
            return Err(Error::InvalidInput(format!("|P| = {} exceeds 1", P.abs())));
        }
        Ok(Self {
            p,
            q,
            P,
            Q: wrap_angle(Q),
        })
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p, self.q, self.P, self.Q]
    }

    pub fn from_array(y: [f64; 4]) -> Self {
        Self {
            p: y[0],
            q: y[1],
            P: y[2],
            Q: y[3],
        }
    }
}

/// One `p = 0` section crossing.
#[derive(Clone, Copy, Debug)]
pub struct SectionCrossing {
    pub t: f64,
    pub P: f64,
    /// Wrapped to `[-pi, pi)`.
    pub Q: f64,
    /// Sign of `dp/dt` at the crossing.
    pub direction: i8,
}

/// Model frequencies and coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DickeDynamics {
    pub omega: f64,
    pub omega0: f64,
    pub xi: f64,
}

/// Roots of the shell condition `H(p = 0, q, P, Q) = E` in `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QRoots {
    None,
    One(f64),
    Two(f64, f64),
}

struct Flow<'a> {
    dyn_: &'a DickeDynamics,
}

impl<'a> Flow<'a> {
    #[inline]
    fn eval(&self, y: &[f64; 4], dy: &mut [f64; 4]) {
        let d = self.dyn_;
        let (p, q, P, Q) = (y[0], y[1], y[2], y[3]);
        // (1-P)(1+P) avoids cancellation near the poles; stages may overshoot
        // |P| = 1, clamp so the error estimate blows up instead of NaN
        let s = ((1.0 - P) * (1.0 + P)).max(1e-32);
        let root = s.sqrt();
        let (sin_q, cos_q) = Q.sin_cos();
        dy[0] = -d.omega * q - 2.0 * d.xi * cos_q * root;
        dy[1] = d.omega * p;
        dy[2] = 2.0 * d.xi * q * sin_q * root;
        dy[3] = d.omega0 - 2.0 * d.xi * q * P * cos_q / root;
    }
}

impl<'a> OdeSystem<4> for Flow<'a> {
    fn rhs(&self, _t: f64, y: &[f64; 4], dydt: &mut [f64; 4]) {
        self.eval(y, dydt);
    }

    fn check_accepted(&self, t: f64, y: &[f64; 4]) -> Result<()> {
        if y[2].abs() >= 1.0 - POLE_TOL {
            return Err(Error::PoleHit {
                t,
                p_abs: y[2].abs(),
            });
        }
        Ok(())
    }
}

/// Flow plus its tangent (variational) dynamics, `[state; tangent]`.
struct VariationalFlow<'a> {
    dyn_: &'a DickeDynamics,
}

impl<'a> OdeSystem<8> for VariationalFlow<'a> {
    fn rhs(&self, _t: f64, y: &[f64; 8], dydt: &mut [f64; 8]) {
        let d = self.dyn_;
        let (p, q, P, Q) = (y[0], y[1], y[2], y[3]);
        let (vp, vq, vP, vQ) = (y[4], y[5], y[6], y[7]);
        let s = ((1.0 - P) * (1.0 + P)).max(1e-32);
        let root = s.sqrt();
        let (sin_q, cos_q) = Q.sin_cos();
        let xi2 = 2.0 * d.xi;

        dydt[0] = -d.omega * q - xi2 * cos_q * root;
        dydt[1] = d.omega * p;
        dydt[2] = xi2 * q * sin_q * root;
        dydt[3] = d.omega0 - xi2 * q * P * cos_q / root;

        // Jacobian rows of (pdot, qdot, Pdot, Qdot) wrt (p, q, P, Q)
        dydt[4] = -d.omega * vq + (xi2 * P * cos_q / root) * vP + (xi2 * sin_q * root) * vQ;
        dydt[5] = d.omega * vp;
        dydt[6] = (xi2 * sin_q * root) * vq - (xi2 * q * P * sin_q / root) * vP
            + (xi2 * q * cos_q * root) * vQ;
        dydt[7] = -(xi2 * P * cos_q / root) * vq - (xi2 * q * cos_q / (s * root)) * vP
            + (xi2 * q * P * sin_q / root) * vQ;
    }

    fn check_accepted(&self, t: f64, y: &[f64; 8]) -> Result<()> {
        if y[2].abs() >= 1.0 - POLE_TOL {
            return Err(Error::PoleHit {
                t,
                p_abs: y[2].abs(),
            });
        }
        Ok(())
    }
}

/// Integrated trajectory with dense output and an energy audit.
#[derive(Clone, Debug)]
pub struct DickeTrajectory {
    pub solution: OdeSolution<4>,
    pub initial: DickeState,
    pub energy0: f64,
    /// `max_t |E(t) - E(0)| / |E(0)|` over accepted step endpoints.
    pub max_rel_energy_drift: f64,
}

impl DickeDynamics {
    pub fn new(omega: f64, omega0: f64, xi: f64) -> Result<Self> {
        if !(omega > 0.0) || !(omega0 > 0.0) {
            return Err(Error::InvalidInput(
                "dicke frequencies must be positive".into(),
            ));
        }
        if !(xi >= 0.0) {
            return Err(Error::InvalidInput("coupling xi must be >= 0".into()));
        }
        Ok(Self { omega, omega0, xi })
    }

    /// Scaled classical energy of a state.
    pub fn energy(&self, s: &DickeState) -> f64 {
        self.omega0 * s.P
            + 0.5 * self.omega * (s.p * s.p + s.q * s.q)
            + 2.0 * self.xi * s.q * s.Q.cos() * ((1.0 - s.P) * (1.0 + s.P)).max(0.0).sqrt()
    }

    /// Equations of motion. Errors at the coordinate pole.
    pub fn rhs(&self, s: &DickeState) -> Result<[f64; 4]> {
        if s.P.abs() >= 1.0 - POLE_TOL {
            return Err(Error::PoleHit {
                t: 0.0,
                p_abs: s.P.abs(),
            });
        }
        let mut dy = [0.0; 4];
        Flow { dyn_: self }.eval(&s.to_array(), &mut dy);
        Ok(dy)
    }

    /// Integrate the flow to `t_max` with dense output and an energy audit.
    pub fn integrate(&self, s0: &DickeState, t_max: f64, tol: f64) -> Result<DickeTrajectory> {
        self.integrate_with(s0, t_max, &Dopri5Options::with_tol(tol))
    }

    pub fn integrate_with(
        &self,
        s0: &DickeState,
        t_max: f64,
        opts: &Dopri5Options,
    ) -> Result<DickeTrajectory> {
        if s0.P.abs() >= 1.0 - POLE_TOL {
            return Err(Error::PoleHit {
                t: 0.0,
                p_abs: s0.P.abs(),
            });
        }
        let flow = Flow { dyn_: self };
        let solution = integrate(&flow, 0.0, s0.to_array(), t_max, opts)?;
        let energy0 = self.energy(s0);
        let mut drift = 0.0f64;
        for seg in &solution.segments {
            let st = DickeState::from_array(seg.eval(seg.t_end()));
            let e = self.energy(&st);
            drift = drift.max((e - energy0).abs());
        }
        let e_end = self.energy(&DickeState::from_array(solution.y_end));
        drift = drift.max((e_end - energy0).abs());
        Ok(DickeTrajectory {
            solution,
            initial: *s0,
            energy0,
            max_rel_energy_drift: drift / energy0.abs().max(f64::MIN_POSITIVE),
        })
    }

    /// Detect `p = 0` crossings with `sign(dp/dt) = direction` on a dense
    /// trajectory; each crossing is refined by bisection on the interpolant
    /// until `|p| <` [`CROSSING_TOL`].
    pub fn poincare_section(
        &self,
        traj: &DickeTrajectory,
        direction: i8,
    ) -> Vec<SectionCrossing> {
        let mut crossings = Vec::new();
        let mut last_t = f64::NEG_INFINITY;
        for seg in &traj.solution.segments {
            // sub-sample each step so multiple crossings per step are kept
            const SUB: usize = 4;
            let mut t_a = seg.t0;
            let mut p_a = seg.eval(t_a)[0];
            for k in 1..=SUB {
                let t_b = seg.t0 + seg.h * k as f64 / SUB as f64;
                let p_b = seg.eval(t_b)[0];
                if (p_a > 0.0) != (p_b > 0.0) {
                    // bisection on the dense interpolant
                    let (mut lo, mut hi) = (t_a, t_b);
                    let (mut p_lo, _p_hi) = (p_a, p_b);
                    let mut t_mid = 0.5 * (lo + hi);
                    for _ in 0..200 {
                        t_mid = 0.5 * (lo + hi);
                        let p_mid = seg.eval(t_mid)[0];
                        if p_mid.abs() < CROSSING_TOL {
                            break;
                        }
                        if (p_lo > 0.0) != (p_mid > 0.0) {
                            hi = t_mid;
                        } else {
                            lo = t_mid;
                            p_lo = p_mid;
                        }
                    }
                    let y = seg.eval(t_mid);
                    let st = DickeState::from_array(y);
                    let dpdt = -self.omega * st.q
                        - 2.0 * self.xi * st.Q.cos() * ((1.0 - st.P) * (1.0 + st.P)).max(0.0).sqrt();
                    let dir = if dpdt >= 0.0 { 1 } else { -1 };
                    if dir == direction && (t_mid - last_t).abs() > 1e-9 {
                        crossings.push(SectionCrossing {
                            t: t_mid,
                            P: st.P.clamp(-1.0, 1.0),
                            Q: wrap_angle(st.Q),
                            direction: dir,
                        });
                        last_t = t_mid;
                    }
                }
                t_a = t_b;
                p_a = p_b;
            }
        }
        crossings
    }

    /// Mean time between successive kept crossings.
    pub fn mean_traversal_time(crossings: &[SectionCrossing]) -> Option<f64> {
        if crossings.len() < 2 {
            return None;
        }
        let dt = crossings.last().unwrap().t - crossings[0].t;
        Some(dt / (crossings.len() - 1) as f64)
    }

    /// Crossings as a section point cloud in the `(Q, P)` domain.
    pub fn section_cloud(crossings: &[SectionCrossing]) -> SectionPointCloud {
        SectionPointCloud {
            domain: dicke_domain(),
            points: crossings.iter().map(|c| [c.Q, c.P]).collect(),
        }
    }

    /// Real `q` roots of `H(p = 0, q, P, Q) = e`.
    pub fn solve_q_on_shell(&self, P: f64, Q: f64, e: f64) -> QRoots {
        // (omega/2) q^2 + 2 xi cos(Q) sqrt(1-P^2) q + (omega0 P - e) = 0
        let a = 0.5 * self.omega;
        let b = 2.0 * self.xi * Q.cos() * ((1.0 - P) * (1.0 + P)).max(0.0).sqrt();
        let c = self.omega0 * P - e;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return QRoots::None;
        }
        if disc == 0.0 {
            return QRoots::One(-b / (2.0 * a));
        }
        let sq = disc.sqrt();
        // large-magnitude root first, companion from the product c/a
        let big = if b >= 0.0 {
            (-b - sq) / (2.0 * a)
        } else {
            (-b + sq) / (2.0 * a)
        };
        if big == 0.0 {
            return QRoots::One(0.0);
        }
        let other = c / (a * big);
        let (lo, hi) = if big <= other { (big, other) } else { (other, big) };
        QRoots::Two(lo, hi)
    }

    /// Fraction of the `(Q, P)` rectangle where the shell condition has real
    /// roots, by direct discriminant counting on an `n x n` grid.
    pub fn accessible_fraction(&self, e: f64, n: usize) -> f64 {
        let mut hits = 0usize;
        for iq in 0..n {
            let Q = -std::f64::consts::PI
                + (iq as f64 + 0.5) * (2.0 * std::f64::consts::PI / n as f64);
            for ip in 0..n {
                let P = -1.0 + (ip as f64 + 0.5) * (2.0 / n as f64);
                if !matches!(self.solve_q_on_shell(P, Q, e), QRoots::None) {
                    hits += 1;
                }
            }
        }
        hits as f64 / (n * n) as f64
    }

    /// Accessibility predicate for masked cell grids, `(u, v) = (Q, P)`.
    pub fn shell_predicate(&self, e: f64) -> impl Fn(f64, f64) -> bool + Sync + '_ {
        move |q_angle: f64, inversion: f64| {
            !matches!(self.solve_q_on_shell(inversion, q_angle, e), QRoots::None)
        }
    }

    /// Rejection-sample `n` states uniformly over the accessible `(P, Q)`
    /// region of the `p = 0` plane at energy `e`; the boson coordinate is one
    /// of the two `q` roots, chosen uniformly at random.
    pub fn sample_shell(&self, e: f64, n: usize, seed: u64) -> Result<Vec<DickeState>> {
        let fraction = self.accessible_fraction(e, 200);
        if fraction < 1e-4 {
            return Err(Error::DegenerateShell {
                energy: e,
                fraction,
            });
        }
        (0..n)
            .map(|idx| {
                let mut rng = derive_rng(seed, idx as u64);
                loop {
                    let P: f64 = rng.random_range(-1.0..=1.0);
                    let Q: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let (lo, hi) = match self.solve_q_on_shell(P, Q, e) {
                        QRoots::None => continue,
                        QRoots::One(q) => (q, q),
                        QRoots::Two(a, b) => (a, b),
                    };
                    let mut q = if rng.random::<bool>() { lo } else { hi };
                    // one Newton polish of the quadratic root
                    let f = 0.5 * self.omega * q * q
                        + 2.0 * self.xi * Q.cos() * ((1.0 - P) * (1.0 + P)).max(0.0).sqrt() * q
                        + (self.omega0 * P - e);
                    let df = self.omega * q
                        + 2.0 * self.xi * Q.cos() * ((1.0 - P) * (1.0 + P)).max(0.0).sqrt();
                    if df.abs() > 1e-12 {
                        q -= f / df;
                    }
                    let state = DickeState::new(0.0, q, P, Q)?;
                    debug_assert!((self.energy(&state) - e).abs() < 1e-12);
                    return Ok(state);
                }
            })
            .collect()
    }

    /// Maximal Lyapunov exponent from the exact variational flow with
    /// tangent renormalization every `renorm_dt`.
    pub fn max_lyapunov(
        &self,
        s0: &DickeState,
        t_max: f64,
        renorm_dt: f64,
        tol: f64,
    ) -> Result<f64> {
        if !(t_max > 0.0) || !(renorm_dt > 0.0) {
            return Err(Error::InvalidInput(
                "lyapunov needs positive t_max and renorm interval".into(),
            ));
        }
        let flow = VariationalFlow { dyn_: self };
        let opts = Dopri5Options {
            dense: false,
            ..Dopri5Options::with_tol(tol)
        };
        let inv_sqrt4 = 0.5;
        let mut y = [
            s0.p,
            s0.q,
            s0.P,
            s0.Q,
            inv_sqrt4,
            inv_sqrt4,
            inv_sqrt4,
            inv_sqrt4,
        ];
        let mut t = 0.0;
        let mut log_sum = 0.0;
        while t < t_max - 1e-12 {
            let t_next = (t + renorm_dt).min(t_max);
            let sol = integrate(&flow, t, y, t_next, &opts)?;
            y = sol.y_end;
            let g = (y[4] * y[4] + y[5] * y[5] + y[6] * y[6] + y[7] * y[7]).sqrt();
            log_sum += g.ln();
            for v in &mut y[4..8] {
                *v /= g;
            }
            t = t_next;
        }
        Ok(log_sum / t_max)
    }

    /// Shell-averaged maximal Lyapunov exponent: mean of `max_lyapunov` over
    /// uniformly sampled accessible `(P, Q)` initial conditions (the area
    /// integral normalized by the accessible area).
    pub fn phase_avg_lyapunov(
        &self,
        e: f64,
        n_samples: usize,
        t_max: f64,
        seed: u64,
        renorm_dt: f64,
        tol: f64,
    ) -> Result<LyapunovEstimate> {
        if n_samples < 100 {
            return Err(Error::InvalidInput(format!(
                "shell average needs n_samples >= 100, got {n_samples}"
            )));
        }
        let states = self.sample_shell(e, n_samples, seed)?;
        let lambdas: Vec<f64> = states
            .par_iter()
            .map(|s| self.max_lyapunov(s, t_max, renorm_dt, tol))
            .collect::<Result<_>>()?;
        let n = lambdas.len() as f64;
        let mean = lambdas.iter().sum::<f64>() / n;
        let var = lambdas.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0);
        Ok(LyapunovEstimate {
            mean,
            stderr: (var / n).sqrt(),
            n_samples,
            n_steps: t_max as usize,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn resonant(xi: f64) -> DickeDynamics {
        DickeDynamics::new(1.0, 1.0, xi).unwrap()
    }

    #[test]
    fn energy_special_cases() {
        let d = resonant(1.3);
        // p = q = 0: E = omega0 P regardless of xi
        let s = DickeState::new(0.0, 0.0, 0.4, 2.0).unwrap();
        assert_abs_diff_eq!(d.energy(&s), 0.4, epsilon = 1e-15);
        // |P| = 1 kills the coupling term for any Q
        let s = DickeState::new(0.7, -0.3, 1.0, 1.1).unwrap();
        let expect = 1.0 + 0.5 * (0.49 + 0.09);
        assert_abs_diff_eq!(d.energy(&s), expect, epsilon = 1e-15);
    }

    #[test]
    fn decoupled_motion_is_harmonic() {
        let d = resonant(0.0);
        let s0 = DickeState::new(0.4, -0.2, 0.3, 0.5).unwrap();
        let dy = d.rhs(&s0).unwrap();
        assert_abs_diff_eq!(dy[2], 0.0); // Pdot = 0
        assert_abs_diff_eq!(dy[3], 1.0); // Qdot = omega0
        let traj = d.integrate(&s0, 2.0 * PI, 1e-10).unwrap();
        let end = DickeState::from_array(traj.solution.y_end);
        assert_abs_diff_eq!(end.p, s0.p, epsilon = 1e-8);
        assert_abs_diff_eq!(end.q, s0.q, epsilon = 1e-8);
        assert_abs_diff_eq!(end.P, s0.P, epsilon = 1e-10);
    }

    #[test]
    fn rhs_is_canonical_flow_of_energy() {
        // (q, p) and (Q, P) are conjugate pairs: qdot = dH/dp, pdot = -dH/dq,
        // Qdot = dH/dP, Pdot = -dH/dQ; checked by central differences.
        let d = resonant(0.9);
        let h = 1e-7;
        let mut rng = derive_rng(4, 0);
        for _ in 0..50 {
            let s = DickeState::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-0.9..0.9),
                rng.random_range(-PI..PI),
            )
            .unwrap();
            let dy = d.rhs(&s).unwrap();
            let e =
                |p: f64, q: f64, pp: f64, qq: f64| {
                    d.energy(&DickeState {
                        p,
                        q,
                        P: pp,
                        Q: qq,
                    })
                };
            let dh_dp = (e(s.p + h, s.q, s.P, s.Q) - e(s.p - h, s.q, s.P, s.Q)) / (2.0 * h);
            let dh_dq = (e(s.p, s.q + h, s.P, s.Q) - e(s.p, s.q - h, s.P, s.Q)) / (2.0 * h);
            let dh_dP = (e(s.p, s.q, s.P + h, s.Q) - e(s.p, s.q, s.P - h, s.Q)) / (2.0 * h);
            let dh_dQ = (e(s.p, s.q, s.P, s.Q + h) - e(s.p, s.q, s.P, s.Q - h)) / (2.0 * h);
            assert!((dy[1] - dh_dp).abs() < 1e-5); // qdot
            assert!((dy[0] + dh_dq).abs() < 1e-5); // pdot
            assert!((dy[3] - dh_dP).abs() < 1e-5); // Qdot
            assert!((dy[2] + dh_dQ).abs() < 1e-5); // Pdot
            // dE/dt along the flow vanishes; exact partial derivatives so
            // the check is not polluted by finite-difference noise
            let root = (1.0 - s.P * s.P).sqrt();
            let ex_dp = d.omega * s.p;
            let ex_dq = d.omega * s.q + 2.0 * d.xi * s.Q.cos() * root;
            let ex_dP = d.omega0 - 2.0 * d.xi * s.q * s.P * s.Q.cos() / root;
            let ex_dQ = -2.0 * d.xi * s.q * s.Q.sin() * root;
            let dedt = ex_dp * dy[0] + ex_dq * dy[1] + ex_dP * dy[2] + ex_dQ * dy[3];
            assert!(dedt.abs() < 1e-9, "dE/dt = {dedt:.3e}");
        }
    }

    #[test]
    fn pole_is_a_hard_error() {
        let d = resonant(1.0);
        let s = DickeState::new(0.0, 0.5, 1.0 - 1e-16, 0.0).unwrap();
        assert!(matches!(d.rhs(&s), Err(Error::PoleHit { .. })));
        assert!(d.integrate(&s, 1.0, 1e-9).is_err());
        // near-pole passages are resolvable states, not errors
        let near = DickeState::new(0.0, 0.5, 1.0 - 1e-13, 0.0).unwrap();
        assert!(d.rhs(&near).is_ok());
    }

    #[test]
    fn energy_conserved_on_chaotic_trajectory() {
        let d = resonant(1.0);
        let s0 = d.sample_shell(1.2, 1, 77).unwrap()[0];
        let traj = d.integrate(&s0, 300.0, ENERGY_CERTIFIED_TOL).unwrap();
        assert!(
            traj.max_rel_energy_drift < 1e-8,
            "drift {:.3e}",
            traj.max_rel_energy_drift
        );
    }

    #[test]
    fn integrable_flow_keeps_p_and_winds_q() {
        let d = resonant(0.0);
        let s0 = DickeState::new(0.3, 0.8, -0.2, 0.4).unwrap();
        let t_max = 50.0;
        let traj = d.integrate(&s0, t_max, 1e-10).unwrap();
        let end = DickeState::from_array(traj.solution.y_end);
        assert!((end.P - s0.P).abs() < 1e-10);
        let q_residual = wrap_angle(end.Q - s0.Q - d.omega0 * t_max);
        assert!(q_residual.abs() < 1e-8, "Q residual {q_residual:.3e}");
    }

    #[test]
    fn harmonic_crossings_once_per_period() {
        let d = resonant(0.0);
        let s0 = DickeState::new(0.9, 0.0, 0.2, 0.0).unwrap();
        let traj = d.integrate(&s0, 100.0, 1e-10).unwrap();
        let crossings = d.poincare_section(&traj, 1);
        assert!(crossings.len() >= 14);
        for w in crossings.windows(2) {
            let dt = w[1].t - w[0].t;
            assert!(
                (dt - 2.0 * PI).abs() < 1e-6,
                "same-direction spacing {dt} != 2 pi"
            );
        }
        // every crossing sits on the section and on the shell
        let e0 = d.energy(&s0);
        for c in &crossings {
            let y = traj.solution.eval(c.t).unwrap();
            assert!(y[0].abs() < CROSSING_TOL);
            let st = DickeState::from_array(y);
            assert!((d.energy(&st) - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn time_reversal_on_regular_trajectory() {
        let d = resonant(0.1);
        let s0 = DickeState::new(0.1, 0.9, 0.3, 1.0).unwrap();
        let opts = Dopri5Options {
            dense: false,
            ..Dopri5Options::with_tol(1e-11)
        };
        let fwd = d.integrate_with(&s0, 100.0, &opts).unwrap();
        let flow = Flow { dyn_: &d };
        let back = integrate(&flow, 100.0, fwd.solution.y_end, 0.0, &opts).unwrap();
        let y = back.y_end;
        assert!((y[0] - s0.p).abs() < 1e-6);
        assert!((y[1] - s0.q).abs() < 1e-6);
        assert!((y[2] - s0.P).abs() < 1e-6);
        assert!((wrap_angle(y[3] - s0.Q)).abs() < 1e-6);
    }

    #[test]
    fn richardson_consistency_on_chaotic_trajectory() {
        // exponential error growth saturates a chaotic endpoint comparison
        // quickly, so the tolerances sit well below the point where the
        // t = 100 amplification reaches O(1)
        let d = resonant(0.5);
        let s0 = d.sample_shell(1.2, 1, 5).unwrap()[0];
        let reference = d.integrate(&s0, 100.0, 5e-14).unwrap().solution.y_end;
        let err_at = |tol: f64| {
            let y = d.integrate(&s0, 100.0, tol).unwrap().solution.y_end;
            (0..4)
                .map(|i| (y[i] - reference[i]).abs())
                .fold(0.0f64, f64::max)
        };
        let coarse = err_at(1e-11);
        let fine = err_at(5e-12);
        assert!(
            fine < coarse,
            "halving tol did not reduce endpoint error: {fine:.3e} !< {coarse:.3e}"
        );
        assert!(coarse < 0.5, "comparison already saturated: {coarse:.3e}");
    }

    #[test]
    fn q_roots_decoupled_forms() {
        let d = resonant(0.0);
        // E > omega0 P: q = +- sqrt(2 (E - omega0 P) / omega)
        match d.solve_q_on_shell(0.25, 1.0, 1.2) {
            QRoots::Two(lo, hi) => {
                let expect = (2.0f64 * (1.2 - 0.25)).sqrt();
                assert_abs_diff_eq!(hi, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(lo, -expect, epsilon = 1e-12);
            }
            other => panic!("expected two roots, got {other:?}"),
        }
        // E < omega0 P: inaccessible
        assert_eq!(d.solve_q_on_shell(0.9, 1.0, 0.5), QRoots::None);
    }

    #[test]
    fn q_roots_residual_audit() {
        let d = resonant(1.0);
        let mut rng = derive_rng(8, 1);
        for _ in 0..200 {
            let P: f64 = rng.random_range(-1.0..1.0);
            let Q: f64 = rng.random_range(-PI..PI);
            let e: f64 = rng.random_range(-1.0..2.0);
            if let QRoots::Two(a, b) = d.solve_q_on_shell(P, Q, e) {
                for q in [a, b] {
                    let st = DickeState::new(0.0, q, P, Q).unwrap();
                    assert!(
                        (d.energy(&st) - e).abs() < 1e-12,
                        "root residual {:.3e}",
                        (d.energy(&st) - e).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn shell_sampling_contract() {
        let d = resonant(1.0);
        let n = 64;
        let states = d.sample_shell(1.2, n, 3).unwrap();
        assert_eq!(states.len(), n);
        for s in &states {
            assert_abs_diff_eq!(s.p, 0.0);
            assert!((d.energy(s) - 1.2).abs() < 1e-12);
        }
        // deterministic per index
        let again = d.sample_shell(1.2, n, 3).unwrap();
        assert_eq!(states, again);
    }

    #[test]
    fn degenerate_shell_rejected() {
        let d = resonant(0.2);
        // far below the ground state: nothing accessible
        assert!(matches!(
            d.sample_shell(-50.0, 4, 0),
            Err(Error::DegenerateShell { .. })
        ));
    }

    #[test]
    fn accessible_fraction_full_at_high_energy() {
        // at E = 1.2 >= omega0 the discriminant is positive everywhere
        let d = resonant(1.0);
        assert_abs_diff_eq!(d.accessible_fraction(1.2, 100), 1.0);
        // lower energy leaves part of the rectangle inaccessible
        let f = d.accessible_fraction(0.5, 200);
        assert!(f < 1.0 && f > 0.2, "fraction {f}");
    }

    #[test]
    fn integrable_lyapunov_vanishes() {
        let d = resonant(0.0);
        let s0 = DickeState::new(0.4, 0.7, 0.2, 0.3).unwrap();
        let lam = d.max_lyapunov(&s0, 1000.0, 1.0, 1e-9).unwrap();
        assert!(lam.abs() < 2e-3, "lambda = {lam}");
    }

    #[test]
    fn chaotic_shell_state_has_positive_lyapunov() {
        let d = resonant(1.0);
        let s0 = d.sample_shell(1.2, 1, 11).unwrap()[0];
        let lam = d.max_lyapunov(&s0, 400.0, 1.0, 1e-9).unwrap();
        assert!(lam > 0.05, "lambda = {lam}");
    }

    #[test]
    fn tangent_flow_matches_flow_map_differences() {
        // propagate the 4 tangent unit vectors over dt = 0.1 and compare with
        // central differences of the flow map
        let d = resonant(1.0);
        let s0 = d.sample_shell(1.2, 1, 21).unwrap()[0];
        let dt = 0.1;
        let opts = Dopri5Options {
            dense: false,
            ..Dopri5Options::with_tol(1e-12)
        };
        let vflow = VariationalFlow { dyn_: &d };
        let flow = Flow { dyn_: &d };
        let h = 1e-5;
        for col in 0..4 {
            let mut y = [0.0; 8];
            y[..4].copy_from_slice(&s0.to_array());
            y[4 + col] = 1.0;
            let tangent = integrate(&vflow, 0.0, y, dt, &opts).unwrap().y_end;
            let mut plus = s0.to_array();
            let mut minus = s0.to_array();
            plus[col] += h;
            minus[col] -= h;
            let yp = integrate(&flow, 0.0, plus, dt, &opts).unwrap().y_end;
            let ym = integrate(&flow, 0.0, minus, dt, &opts).unwrap().y_end;
            for row in 0..4 {
                let fd = (yp[row] - ym[row]) / (2.0 * h);
                assert!(
                    (fd - tangent[4 + row]).abs() < 1e-5,
                    "J[{row}][{col}]: fd {fd} vs tangent {}",
                    tangent[4 + row]
                );
            }
        }
    }

    #[test]
    fn lyapunov_nonnegative_up_to_noise() {
        let d = resonant(0.3);
        let states = d.sample_shell(1.2, 4, 13).unwrap();
        for s in &states {
            let lam = d.max_lyapunov(s, 500.0, 1.0, 1e-9).unwrap();
            assert!(lam >= -2e-3, "lambda = {lam}");
        }
    }

    #[test]
    fn shell_average_two_seed_consistency() {
        let d = resonant(0.5);
        let a = d.phase_avg_lyapunov(1.2, 300, 200.0, 1, 1.0, 1e-8).unwrap();
        let b = d.phase_avg_lyapunov(1.2, 300, 200.0, 2, 1.0, 1e-8).unwrap();
        let combined = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        assert!(
            (a.mean - b.mean).abs() < 3.0 * combined,
            "{} vs {} +- {}",
            a.mean,
            b.mean,
            combined
        );
    }

    #[test]
    fn wrap_angle_range() {
        for x in [-10.0, -PI, -0.1, 0.0, 0.1, PI, 10.0, 100.0] {
            let w = wrap_angle(x);
            assert!((-PI..PI).contains(&w), "wrap({x}) = {w}");
        }
        assert_abs_diff_eq!(wrap_angle(2.0 * PI + 0.3), 0.3, epsilon = 1e-12);
    }
}
