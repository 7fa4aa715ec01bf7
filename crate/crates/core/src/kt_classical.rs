//! Classical kicked-top dynamics on the unit sphere.
//!
//! One kick period maps the unit vector `X` by a rotation about `z` through
//! `beta` followed by a rotation about `x` through the state-dependent angle
//! `Theta = gamma * (X cos beta - Y sin beta)`, i.e. `Theta = gamma * X'`
//! with `X'` the post-precession first component. Both factors are proper
//! rotations, so the map is exactly norm-preserving; each step renormalizes
//! defensively and the pre-renormalization drift is checked in tests to sit
//! at roundoff.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Unit vector on the sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// How far from 1 the squared norm of an *input* state may be.
const INPUT_NORM_TOL: f64 = 1e-9;

impl SphereState {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = Self { x, y, z };
        if (s.norm() - 1.0).abs() > INPUT_NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "state norm {} deviates from 1 by more than {INPUT_NORM_TOL:.0e}",
                s.norm()
            )));
        }
        Ok(s.renormalized())
    }

    /// State from canonical coordinates `(phi, cos theta)`.
    pub fn from_angles(phi: f64, cos_theta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&cos_theta) {
            return Err(Error::InvalidInput(format!(
                "cos theta = {cos_theta} outside [-1, 1]"
            )));
        }
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        Ok(Self {
            x: sin_theta * phi.cos(),
            y: sin_theta * phi.sin(),
            z: cos_theta,
        })
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn renormalized(self) -> Self {
        let n = self.norm();
        Self {
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Canonical section coordinates `(phi, cos theta)` with
    /// `phi in [-pi, pi)`.
    pub fn angles(&self) -> (f64, f64) {
        let mut phi = self.y.atan2(self.x);
        if phi == std::f64::consts::PI {
            phi = -std::f64::consts::PI;
        }
        (phi, self.z.clamp(-1.0, 1.0))
    }

    pub fn dot(&self, other: &SphereState) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

/// Uniform point on the sphere (uniform `cos theta`, uniform `phi`), the
/// measure behind the phase-space average.
pub fn sample_sphere<R: Rng>(rng: &mut R) -> SphereState {
    let cos_theta: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    SphereState::from_angles(phi, cos_theta).expect("sampled coordinates are in range")
}

#[inline]
fn step_unchecked(s: &SphereState, beta: f64, gamma: f64) -> SphereState {
    let (cb, sb) = (beta.cos(), beta.sin());
    let xp = cb * s.x - sb * s.y;
    let yp = sb * s.x + cb * s.y;
    let theta = gamma * xp;
    let (ct, st) = (theta.cos(), theta.sin());
    SphereState {
        x: xp,
        y: ct * yp - st * s.z,
        z: st * yp + ct * s.z,
    }
    .renormalized()
}

/// One kick period.
pub fn kt_step(s: &SphereState, beta: f64, gamma: f64) -> Result<SphereState> {
    if (s.norm() - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::InvalidInput(format!(
            "kt_step input norm {} off unit sphere",
            s.norm()
        )));
    }
    Ok(step_unchecked(s, beta, gamma))
}

/// Exact derivative of the kick map, including the dependence of the kick
/// angle on `(X, Y)`.
pub fn kt_jacobian(s: &SphereState, beta: f64, gamma: f64) -> [[f64; 3]; 3] {
    let (cb, sb) = (beta.cos(), beta.sin());
    let xp = cb * s.x - sb * s.y;
    let yp = sb * s.x + cb * s.y;
    let theta = gamma * xp;
    let (ct, st) = (theta.cos(), theta.sin());
    // dTheta/d(x, y, z) = (gamma cb, -gamma sb, 0)
    let dth_x = gamma * cb;
    let dth_y = -gamma * sb;
    let ddtheta_y = -yp * st - s.z * ct; // d(Y'')/dTheta
    let ddtheta_z = yp * ct - s.z * st; // d(Z'')/dTheta
    [
        [cb, -sb, 0.0],
        [
            sb * ct + ddtheta_y * dth_x,
            cb * ct + ddtheta_y * dth_y,
            -st,
        ],
        [
            sb * st + ddtheta_z * dth_x,
            cb * st + ddtheta_z * dth_y,
            ct,
        ],
    ]
}

fn matvec(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Deterministic tangent vector orthogonal to `s`.
fn initial_tangent(s: &SphereState) -> [f64; 3] {
    // z-hat x s unless s is (anti)polar, then x-hat x s
    let mut v = [-s.y, s.x, 0.0];
    if norm3(&v) < 1e-6 {
        v = [0.0, -s.z, s.y];
    }
    let n = norm3(&v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Maximal Lyapunov exponent by tangent propagation with per-step
/// renormalization (Benettin).
pub fn max_lyapunov(s0: &SphereState, n: usize, beta: f64, gamma: f64) -> Result<f64> {
    if n < 1000 {
        return Err(Error::InvalidInput(format!(
            "lyapunov estimate needs n >= 1000 kicks, got {n}"
        )));
    }
    let mut s = SphereState::new(s0.x, s0.y, s0.z)?;
    let mut v = initial_tangent(&s);
    let mut log_sum = 0.0f64;
    for _ in 0..n {
        let jac = kt_jacobian(&s, beta, gamma);
        v = matvec(&jac, &v);
        let g = norm3(&v);
        log_sum += g.ln();
        v = [v[0] / g, v[1] / g, v[2] / g];
        s = step_unchecked(&s, beta, gamma);
    }
    Ok(log_sum / n as f64)
}

/// Monte Carlo mean of an observable over sphere-uniform initial conditions.
#[derive(Clone, Copy, Debug)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub n_steps: usize,
}

/// Phase-space averaged maximal Lyapunov exponent
/// `(1/4 pi) int lambda_m sin theta dtheta dphi`, sampled with uniform
/// `(cos theta, phi)` so the spherical measure needs no weights.
pub fn phase_avg_lyapunov(
    beta: f64,
    gamma: f64,
    n_samples: usize,
    n_steps: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n_samples < 100 {
        return Err(Error::InvalidInput(format!(
            "phase average needs n_samples >= 100, got {n_samples}"
        )));
    }
    let lambdas: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|idx| {
            let mut rng = derive_rng(seed, idx as u64);
            let s0 = sample_sphere(&mut rng);
            max_lyapunov(&s0, n_steps, beta, gamma)
        })
        .collect::<Result<_>>()?;
    let n = lambdas.len() as f64;
    let mean = lambdas.iter().sum::<f64>() / n;
    let var = lambdas.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0);
    Ok(LyapunovEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_samples,
        n_steps,
    })
}

/// Stroboscopic record of a kicked trajectory in `(phi, cos theta)`.
#[derive(Clone, Debug)]
pub struct KtTrajectory {
    /// One `(phi, cos theta)` pair per kick, in kick order.
    pub points: Vec<[f64; 2]>,
    pub n_kicks: usize,
    pub initial: SphereState,
}

/// Iterate the map `n_kicks` times, recording the canonical coordinates
/// after each kick.
pub fn kt_trajectory(
    s0: &SphereState,
    n_kicks: usize,
    beta: f64,
    gamma: f64,
) -> Result<KtTrajectory> {
    let initial = SphereState::new(s0.x, s0.y, s0.z)?;
    let mut s = initial;
    let mut points = Vec::with_capacity(n_kicks);
    for _ in 0..n_kicks {
        s = step_unchecked(&s, beta, gamma);
        let (phi, cos_theta) = s.angles();
        points.push([phi, cos_theta]);
    }
    Ok(KtTrajectory {
        points,
        n_kicks,
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const BETA: f64 = PI / 3.0;

    #[test]
    fn zero_kick_is_z_rotation() {
        let s = SphereState::from_angles(0.4, 0.3).unwrap();
        let out = kt_step(&s, BETA, 0.0).unwrap();
        assert_abs_diff_eq!(out.z, s.z, epsilon = 1e-15);
        let expect_x = BETA.cos() * s.x - BETA.sin() * s.y;
        assert_abs_diff_eq!(out.x, expect_x, epsilon = 1e-14);
    }

    #[test]
    fn pole_is_fixed_for_zero_beta() {
        let s = SphereState::new(0.0, 0.0, 1.0).unwrap();
        let out = kt_step(&s, 0.0, 5.5).unwrap();
        assert_abs_diff_eq!(out.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.z, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_off_sphere_input() {
        let s = SphereState { x: 1.1, y: 0.0, z: 0.0 };
        assert!(kt_step(&s, BETA, 1.0).is_err());
        assert!(SphereState::new(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn norm_preserved_over_long_runs() {
        let mut s = SphereState::from_angles(1.1, 0.2).unwrap();
        let mut raw_drift = 0.0f64;
        for _ in 0..100_000 {
            // audit the pre-renormalization drift of a single composed step
            let (cb, sb) = (BETA.cos(), BETA.sin());
            let xp = cb * s.x - sb * s.y;
            let yp = sb * s.x + cb * s.y;
            let theta = 7.0 * xp;
            let raw = [
                xp,
                theta.cos() * yp - theta.sin() * s.z,
                theta.sin() * yp + theta.cos() * s.z,
            ];
            raw_drift = raw_drift.max((norm3(&raw) - 1.0).abs());
            s = step_unchecked(&s, BETA, 7.0);
            debug_assert!((s.norm() - 1.0).abs() < 1e-12);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(raw_drift < 1e-13, "per-step drift {raw_drift:.3e}");
    }

    #[test]
    fn zero_kick_is_isometry() {
        let mut a = SphereState::from_angles(0.3, 0.7).unwrap();
        let mut b = SphereState::from_angles(-2.0, -0.4).unwrap();
        let angle0 = a.dot(&b).acos();
        for _ in 0..1000 {
            a = step_unchecked(&a, BETA, 0.0);
            b = step_unchecked(&b, BETA, 0.0);
        }
        assert_abs_diff_eq!(a.dot(&b).acos(), angle0, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = derive_rng(42, 0);
        let h = 1e-6;
        for _ in 0..100 {
            let s = sample_sphere(&mut rng);
            let gamma: f64 = rng.random_range(0.0..8.0);
            let beta: f64 = rng.random_range(0.0..2.0 * PI);
            let jac = kt_jacobian(&s, beta, gamma);
            for col in 0..3 {
                let mut plus = [s.x, s.y, s.z];
                let mut minus = plus;
                plus[col] += h;
                minus[col] -= h;
                // finite differences of the raw (un-renormalized) map
                let f = |v: [f64; 3]| {
                    let (cb, sb) = (beta.cos(), beta.sin());
                    let xp = cb * v[0] - sb * v[1];
                    let yp = sb * v[0] + cb * v[1];
                    let theta = gamma * xp;
                    [
                        xp,
                        theta.cos() * yp - theta.sin() * v[2],
                        theta.sin() * yp + theta.cos() * v[2],
                    ]
                };
                let fp = f(plus);
                let fm = f(minus);
                for row in 0..3 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!(
                        (fd - jac[row][col]).abs() < 1e-6,
                        "entry ({row},{col}): fd {fd} vs analytic {}",
                        jac[row][col]
                    );
                }
            }
        }
    }

    #[test]
    fn tangent_map_preserves_sphere_area() {
        let mut rng = derive_rng(7, 3);
        for _ in 0..50 {
            let s = sample_sphere(&mut rng);
            let gamma: f64 = rng.random_range(0.0..8.0);
            let jac = kt_jacobian(&s, BETA, gamma);
            // orthonormal tangent frame at s
            let e1 = initial_tangent(&s);
            let e2 = [
                s.y * e1[2] - s.z * e1[1],
                s.z * e1[0] - s.x * e1[2],
                s.x * e1[1] - s.y * e1[0],
            ];
            let sp = step_unchecked(&s, BETA, gamma);
            let f1 = initial_tangent(&sp);
            let f2 = [
                sp.y * f1[2] - sp.z * f1[1],
                sp.z * f1[0] - sp.x * f1[2],
                sp.x * f1[1] - sp.y * f1[0],
            ];
            let je1 = matvec(&jac, &e1);
            let je2 = matvec(&jac, &e2);
            let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            let det = dot(&f1, &je1) * dot(&f2, &je2) - dot(&f1, &je2) * dot(&f2, &je1);
            assert!((det.abs() - 1.0).abs() < 1e-8, "tangent det {det}");
        }
    }

    #[test]
    fn zero_kick_lyapunov_vanishes() {
        let s0 = SphereState::from_angles(0.9, 0.1).unwrap();
        let lam = max_lyapunov(&s0, 100_000, BETA, 0.0).unwrap();
        assert!(lam.abs() < 2e-3, "lambda = {lam}");
    }

    #[test]
    fn strong_kick_lyapunov_positive() {
        let s0 = SphereState::from_angles(1.0, 0.3).unwrap();
        let lam = max_lyapunov(&s0, 10_000, BETA, 7.0).unwrap();
        assert!(lam > 0.3, "lambda = {lam}");
    }

    #[test]
    fn lyapunov_nonnegative_up_to_noise() {
        let mut rng = derive_rng(3, 9);
        for _ in 0..5 {
            let s0 = sample_sphere(&mut rng);
            let gamma: f64 = rng.random_range(0.0..8.0);
            let lam = max_lyapunov(&s0, 20_000, BETA, gamma).unwrap();
            assert!(lam >= -2e-3, "lambda = {lam} at gamma = {gamma}");
        }
    }

    #[test]
    fn benettin_matches_qr_product_oracle() {
        // Gram-Schmidt QR accumulation of the full Jacobian product,
        // independently coded; leading log-diagonal equals the tangent sum.
        let s0 = SphereState::from_angles(1.0, 0.3).unwrap();
        let n = 10_000;
        let gamma = 7.0;
        let benettin = max_lyapunov(&s0, n, BETA, gamma).unwrap();

        let mut s = s0;
        let mut q = [initial_tangent(&s0), [0.0; 3], [0.0; 3]];
        // complete q to an orthonormal triple
        q[1] = {
            let e1 = q[0];
            [
                s0.y * e1[2] - s0.z * e1[1],
                s0.z * e1[0] - s0.x * e1[2],
                s0.x * e1[1] - s0.y * e1[0],
            ]
        };
        q[2] = [s0.x, s0.y, s0.z];
        let mut log_r00 = 0.0f64;
        for _ in 0..n {
            let jac = kt_jacobian(&s, BETA, gamma);
            let mut w = [matvec(&jac, &q[0]), matvec(&jac, &q[1]), matvec(&jac, &q[2])];
            // modified Gram-Schmidt
            let d0 = norm3(&w[0]);
            log_r00 += d0.ln();
            for k in 0..3 {
                w[0][k] /= d0;
            }
            for col in 1..3 {
                for prev in 0..col {
                    let proj =
                        w[col][0] * w[prev][0] + w[col][1] * w[prev][1] + w[col][2] * w[prev][2];
                    for k in 0..3 {
                        w[col][k] -= proj * w[prev][k];
                    }
                }
                let d = norm3(&w[col]);
                for k in 0..3 {
                    w[col][k] /= d;
                }
            }
            q = w;
            s = step_unchecked(&s, BETA, gamma);
        }
        let qr_lambda = log_r00 / n as f64;
        assert!(
            (qr_lambda - benettin).abs() < 1e-3,
            "QR {qr_lambda} vs Benettin {benettin}"
        );
    }

    #[test]
    fn phase_average_regular_regime_is_zero() {
        let est = phase_avg_lyapunov(BETA, 0.2, 120, 5_000, 11).unwrap();
        assert!(est.mean.abs() < 0.01, "Lambda_m = {}", est.mean);
    }

    #[test]
    fn phase_average_two_seed_consistency() {
        let a = phase_avg_lyapunov(BETA, 3.0, 200, 2_000, 1).unwrap();
        let b = phase_avg_lyapunov(BETA, 3.0, 200, 2_000, 2).unwrap();
        let combined = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        assert!(
            (a.mean - b.mean).abs() < 3.0 * combined,
            "means {} vs {} (combined stderr {})",
            a.mean,
            b.mean,
            combined
        );
    }

    #[test]
    fn phase_average_rejects_small_samples() {
        assert!(phase_avg_lyapunov(BETA, 1.0, 50, 2_000, 0).is_err());
    }

    #[test]
    fn trajectory_count_contract() {
        let s0 = SphereState::from_angles(0.2, -0.5).unwrap();
        let traj = kt_trajectory(&s0, 1000, BETA, 2.0).unwrap();
        assert_eq!(traj.points.len(), 1000);
        assert!(traj
            .points
            .iter()
            .all(|p| (-PI..PI).contains(&p[0]) && (-1.0..=1.0).contains(&p[1])));
    }

    #[test]
    fn zero_kick_trajectory_constant_latitude() {
        let s0 = SphereState::from_angles(0.2, 0.37).unwrap();
        let traj = kt_trajectory(&s0, 200, BETA, 0.0).unwrap();
        for p in &traj.points {
            assert_abs_diff_eq!(p[1], 0.37, epsilon = 1e-12);
        }
    }
}
