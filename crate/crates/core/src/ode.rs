//! Adaptive Dormand-Prince 5(4) integration with continuous (dense) output.
//!
//! Explicit RK with FSAL, standard step control, and the order-4 interpolant
//! stored per accepted step so events (Poincaré crossings) can be refined
//! afterwards without re-evaluating the right-hand side. Supports forward and
//! backward time. Tolerances are applied per component as
//! `atol + rtol * max(|y0|, |y1|)` with an RMS error norm.

use crate::error::{Error, Result};

/// Right-hand side of a first-order system.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dydt: &mut [f64; N]);

    /// State validity check, run on every *accepted* step (intermediate
    /// stages may legally overshoot). Default accepts everything.
    fn check_accepted(&self, _t: f64, _y: &[f64; N]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    pub dense: bool,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: None,
            max_steps: 50_000_000,
            dense: true,
        }
    }
}

impl Dopri5Options {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

/// Interpolant for one accepted step `[t0, t0 + h]`.
#[derive(Clone, Debug)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    /// Evaluate the interpolant at `t` (caller keeps `t` inside the step).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        let mut y = [0.0; N];
        for i in 0..N {
            let c = &self.cont;
            y[i] =
                c[0][i] + theta * (c[1][i] + th1 * (c[2][i] + theta * (c[3][i] + th1 * c[4][i])));
        }
        y
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }
}

#[derive(Clone, Debug)]
pub struct OdeSolution<const N: usize> {
    pub t0: f64,
    pub t_end: f64,
    pub y0: [f64; N],
    pub y_end: [f64; N],
    /// Interpolants for every accepted step, in time order (empty when dense
    /// output is disabled).
    pub segments: Vec<DenseSegment<N>>,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub n_rhs: usize,
}

impl<const N: usize> OdeSolution<N> {
    /// Interpolated state at `t` within the integration span.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if self.segments.is_empty() {
            return None;
        }
        let forward = self.t_end >= self.t0;
        let (lo, hi) = if forward {
            (self.t0, self.t_end)
        } else {
            (self.t_end, self.t0)
        };
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return None;
        }
        let idx = self
            .segments
            .partition_point(|seg| {
                if forward {
                    seg.t_end() < t
                } else {
                    seg.t_end() > t
                }
            })
            .min(self.segments.len() - 1);
        Some(self.segments[idx].eval(t))
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded error coefficients (b - b_hat)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense-output coefficients
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn rms_scaled<const N: usize>(v: &[f64; N], sc: &[f64; N]) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        let r = v[i] / sc[i];
        s += r * r;
    }
    (s / N as f64).sqrt()
}

/// Hairer-style automatic initial step size.
fn initial_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    posneg: f64,
    opts: &Dopri5Options,
) -> f64 {
    let mut sc = [0.0; N];
    for i in 0..N {
        sc[i] = opts.atol + opts.rtol * y0[i].abs();
    }
    let d0 = rms_scaled(y0, &sc);
    let d1 = rms_scaled(f0, &sc);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    if let Some(hm) = opts.h_max {
        h0 = h0.min(hm);
    }
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y0[i] + posneg * h0 * f0[i];
    }
    let mut f1 = [0.0; N];
    sys.rhs(t0 + posneg * h0, &y1, &mut f1);
    let mut df = [0.0; N];
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = rms_scaled(&df, &sc) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let mut h = (100.0 * h0).min(h1);
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }
    h
}

/// Integrate `sys` from `(t0, y0)` to `t_end`.
pub fn integrate<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Dopri5Options,
) -> Result<OdeSolution<N>> {
    let span = t_end - t0;
    if span == 0.0 {
        return Ok(OdeSolution {
            t0,
            t_end,
            y0,
            y_end: y0,
            segments: Vec::new(),
            n_accepted: 0,
            n_rejected: 0,
            n_rhs: 0,
        });
    }
    let posneg = span.signum();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = [0.0; N];
    sys.rhs(t, &y, &mut k1);
    let mut n_rhs = 1usize;
    let mut h = initial_step(sys, t0, &y0, &k1, posneg, opts).min(span.abs());
    n_rhs += 1;

    let mut segments = Vec::new();
    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;
    let mut last_rejected = false;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);
    let mut yt = [0.0; N];

    while posneg * (t_end - t) > 0.0 {
        if n_accepted + n_rejected >= opts.max_steps {
            return Err(Error::StepBudget {
                t,
                max_steps: opts.max_steps,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        if h > posneg * (t_end - t) {
            h = posneg * (t_end - t);
        }
        let hs = posneg * h;

        for i in 0..N {
            yt[i] = y[i] + hs * A21 * k1[i];
        }
        sys.rhs(t + C2 * hs, &yt, &mut k2);
        for i in 0..N {
            yt[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * hs, &yt, &mut k3);
        for i in 0..N {
            yt[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * hs, &yt, &mut k4);
        for i in 0..N {
            yt[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * hs, &yt, &mut k5);
        for i in 0..N {
            yt[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + hs, &yt, &mut k6);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] =
                y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        sys.rhs(t + hs, &y_new, &mut k7); // FSAL stage
        n_rhs += 6;

        let mut err_vec = [0.0; N];
        for i in 0..N {
            err_vec[i] = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let mut sc = [0.0; N];
        for i in 0..N {
            sc[i] = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        }
        let err = rms_scaled(&err_vec, &sc);

        if err.is_finite() && err <= 1.0 {
            sys.check_accepted(t + hs, &y_new)?;
            if opts.dense {
                let mut cont = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = hs * k1[i] - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - hs * k7[i] - bspl;
                    cont[4][i] = hs
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                segments.push(DenseSegment { t0: t, h: hs, cont });
            }
            t += hs;
            y = y_new;
            k1 = k7; // FSAL
            n_accepted += 1;

            let mut fac = 0.9 * err.powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            if let Some(hm) = opts.h_max {
                h = h.min(hm);
            }
            last_rejected = false;
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            n_rejected += 1;
            last_rejected = true;
        }
    }

    Ok(OdeSolution {
        t0,
        t_end,
        y0,
        y_end: y,
        segments,
        n_accepted,
        n_rejected,
        n_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    struct Sho;

    impl OdeSystem<2> for Sho {
        fn rhs(&self, _t: f64, y: &[f64; 2], dydt: &mut [f64; 2]) {
            dydt[0] = y[1];
            dydt[1] = -y[0];
        }
    }

    #[test]
    fn harmonic_oscillator_period() {
        let sol =
            integrate(&Sho, 0.0, [1.0, 0.0], 2.0 * PI, &Dopri5Options::with_tol(1e-10)).unwrap();
        assert_abs_diff_eq!(sol.y_end[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.y_end[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn dense_output_matches_analytic_solution() {
        let sol =
            integrate(&Sho, 0.0, [1.0, 0.0], 10.0, &Dopri5Options::with_tol(1e-10)).unwrap();
        for k in 0..200 {
            let t = 10.0 * k as f64 / 200.0;
            let y = sol.eval(t).unwrap();
            assert_abs_diff_eq!(y[0], t.cos(), epsilon = 1e-7);
            assert_abs_diff_eq!(y[1], -t.sin(), epsilon = 1e-7);
        }
    }

    #[test]
    fn backward_integration_returns() {
        let fwd =
            integrate(&Sho, 0.0, [0.3, 0.4], 25.0, &Dopri5Options::with_tol(1e-11)).unwrap();
        let back =
            integrate(&Sho, 25.0, fwd.y_end, 0.0, &Dopri5Options::with_tol(1e-11)).unwrap();
        assert_abs_diff_eq!(back.y_end[0], 0.3, epsilon = 1e-8);
        assert_abs_diff_eq!(back.y_end[1], 0.4, epsilon = 1e-8);
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        // y' = y^2, y(0) = 1: exact 1/(1-t)
        struct Riccati;
        impl OdeSystem<1> for Riccati {
            fn rhs(&self, _t: f64, y: &[f64; 1], dydt: &mut [f64; 1]) {
                dydt[0] = y[0] * y[0];
            }
        }
        let exact = 2.0;
        let coarse =
            integrate(&Riccati, 0.0, [1.0], 0.5, &Dopri5Options::with_tol(1e-6)).unwrap();
        let fine = integrate(&Riccati, 0.0, [1.0], 0.5, &Dopri5Options::with_tol(1e-9)).unwrap();
        let e_coarse = (coarse.y_end[0] - exact).abs();
        let e_fine = (fine.y_end[0] - exact).abs();
        assert!(e_fine < e_coarse, "{e_fine} !< {e_coarse}");
        assert!(e_fine < 1e-7);
    }

    #[test]
    fn rejects_on_accept_check() {
        struct Guarded;
        impl OdeSystem<1> for Guarded {
            fn rhs(&self, _t: f64, _y: &[f64; 1], dydt: &mut [f64; 1]) {
                dydt[0] = 1.0;
            }
            fn check_accepted(&self, _t: f64, y: &[f64; 1]) -> Result<()> {
                if y[0] > 0.5 {
                    Err(Error::PoleHit {
                        t: 0.0,
                        p_abs: y[0],
                    })
                } else {
                    Ok(())
                }
            }
        }
        let res = integrate(&Guarded, 0.0, [0.0], 1.0, &Dopri5Options::with_tol(1e-8));
        assert!(matches!(res, Err(Error::PoleHit { .. })));
    }

    #[test]
    fn step_budget_is_enforced() {
        let opts = Dopri5Options {
            max_steps: 10,
            ..Dopri5Options::with_tol(1e-12)
        };
        let res = integrate(&Sho, 0.0, [1.0, 0.0], 1000.0, &opts);
        assert!(matches!(res, Err(Error::StepBudget { .. })));
    }

    #[test]
    fn segment_eval_is_continuous_across_steps() {
        let sol = integrate(&Sho, 0.0, [1.0, 0.0], 5.0, &Dopri5Options::with_tol(1e-9)).unwrap();
        for w in sol.segments.windows(2) {
            let t = w[0].t_end();
            let a = w[0].eval(t);
            let b = w[1].eval(t);
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
        }
    }
}
