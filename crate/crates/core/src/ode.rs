//! Explicit integrators: adaptive Dormand–Prince 5(4) with dense output, and
//! fixed-step classical RK4 with additive stochastic increments.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem<T, const N: usize> {
    fn rhs(&self, t: T, y: &[T; N], dy: &mut [T; N]);
}

/// Receives uniformly spaced output samples and may adjust the state after
/// every accepted step (e.g. to wrap an angle).
pub trait Observer<T, const N: usize> {
    fn sample(&mut self, t: T, y: &[T; N]);

    fn after_step(&mut self, _t: T, _y: &mut [T; N]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options<T, const N: usize> {
    pub rtol: T,
    /// Absolute error floor per component.
    pub atol: [T; N],
    /// Components whose magnitude does not enter the error scale.
    pub absolute_only: [bool; N],
    pub h_init: T,
    pub h_min: T,
    pub h_max: T,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince tableau
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output (Hairer & Wanner, DOPRI5 contd5)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for (c, k) in terms {
        let c = T::lit(*c) * h;
        for i in 0..N {
            out[i] = out[i] + c * k[i];
        }
    }
    out
}

/// Integrates from `t0` to `t_end`, emitting samples at `t_first + k dt`
/// (for all such times inside `[t0, t_end]`) through the dense-output
/// interpolant. Returns the final state.
pub fn dopri5<T, S, O, const N: usize>(
    sys: &S,
    t0: T,
    y0: [T; N],
    t_end: T,
    t_first: T,
    dt: T,
    opts: &Dopri5Options<T, N>,
    obs: &mut O,
) -> Result<([T; N], StepStats)>
where
    T: Real,
    S: OdeSystem<T, N>,
    O: Observer<T, N>,
{
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = [T::zero(); N];
    sys.rhs(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut next_out: usize = 0;
    let out_time = |k: usize| t_first + dt * T::from_usize_lossy(k);
    while out_time(next_out) < t0 {
        next_out += 1;
    }
    // emit a sample exactly at t0 if requested
    if out_time(next_out) == t0 && t0 <= t_end {
        obs.sample(t0, &y);
        next_out += 1;
    }

    let mut h = opts.h_init.min(opts.h_max).min(t_end - t0);
    let safety = T::lit(0.9);
    let fac_min = T::lit(0.2);
    let fac_max = T::lit(10.0);
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::NonConvergence {
                iterations: opts.max_steps,
                residual: t.as_f64(),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k2 = [T::zero(); N];
        let mut k3 = [T::zero(); N];
        let mut k4 = [T::zero(); N];
        let mut k5 = [T::zero(); N];
        let mut k6 = [T::zero(); N];
        let mut k7 = [T::zero(); N];
        sys.rhs(t + T::lit(C2) * h, &axpy(&y, h, &[(A21, &k1)]), &mut k2);
        sys.rhs(t + T::lit(C3) * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]), &mut k3);
        sys.rhs(
            t + T::lit(C4) * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            &mut k4,
        );
        sys.rhs(
            t + T::lit(C5) * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            &mut k5,
        );
        sys.rhs(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            &mut k6,
        );
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        sys.rhs(t + h, &y_new, &mut k7);
        stats.evaluations += 6;

        let mut err_sq = T::zero();
        for i in 0..N {
            let e = h
                * (T::lit(E1) * k1[i]
                    + T::lit(E3) * k3[i]
                    + T::lit(E4) * k4[i]
                    + T::lit(E5) * k5[i]
                    + T::lit(E6) * k6[i]
                    + T::lit(E7) * k7[i]);
            let mag = if opts.absolute_only[i] {
                T::zero()
            } else {
                y[i].abs().max(y_new[i].abs())
            };
            let sc = opts.atol[i] + opts.rtol * mag;
            err_sq = err_sq + (e / sc) * (e / sc);
        }
        let err = (err_sq / T::from_usize_lossy(N)).sqrt();

        if err <= T::one() && err.is_finite() {
            let t_new = t + h;
            // dense output for samples inside (t, t_new]
            if out_time(next_out) <= t_new && out_time(next_out) <= t_end {
                let mut r3 = [T::zero(); N];
                let mut r4 = [T::zero(); N];
                let mut r5 = [T::zero(); N];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    r3[i] = bspl;
                    r4[i] = ydiff - h * k7[i] - bspl;
                    r5[i] = h
                        * (T::lit(D1) * k1[i]
                            + T::lit(D3) * k3[i]
                            + T::lit(D4) * k4[i]
                            + T::lit(D5) * k5[i]
                            + T::lit(D6) * k6[i]
                            + T::lit(D7) * k7[i]);
                }
                while out_time(next_out) <= t_new && out_time(next_out) <= t_end {
                    let ts = out_time(next_out);
                    let th = (ts - t) / h;
                    let th1 = T::one() - th;
                    let mut ys = [T::zero(); N];
                    for i in 0..N {
                        ys[i] = y[i]
                            + th * ((y_new[i] - y[i]) + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
                    }
                    obs.sample(ts, &ys);
                    next_out += 1;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            obs.after_step(t, &mut y);
            stats.accepted += 1;
            let mut fac = safety * err.max(T::lit(1e-10)).powf(T::lit(-0.2));
            fac = fac.max(fac_min).min(fac_max);
            if last_rejected {
                fac = fac.min(T::one());
            }
            last_rejected = false;
            h = (h * fac).min(opts.h_max);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            let fac = if err.is_finite() {
                (safety * err.powf(T::lit(-0.2))).max(fac_min)
            } else {
                fac_min
            };
            h = h * fac;
        }
        if h < opts.h_min && t < t_end {
            return Err(Error::StepSizeUnderflow { t: t.as_f64() });
        }
    }
    Ok((y, stats))
}

/// Fixed-step classical RK4 for the drift plus an additive increment
/// `noise(t, dt)` added after every step (strong order 1 for additive noise).
/// Samples are emitted every `steps_per_sample` steps, starting at `t0`.
pub fn rk4_additive<T, S, O, F, const N: usize>(
    sys: &S,
    t0: T,
    y0: [T; N],
    dt: T,
    steps: usize,
    steps_per_sample: usize,
    mut noise: F,
    obs: &mut O,
) -> [T; N]
where
    T: Real,
    S: OdeSystem<T, N>,
    O: Observer<T, N>,
    F: FnMut(T, T) -> [T; N],
{
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let mut y = y0;
    let mut k1 = [T::zero(); N];
    let mut k2 = [T::zero(); N];
    let mut k3 = [T::zero(); N];
    let mut k4 = [T::zero(); N];
    let steps_per_sample = steps_per_sample.max(1);
    for n in 0..steps {
        let t = t0 + dt * T::from_usize_lossy(n);
        if n % steps_per_sample == 0 {
            obs.sample(t, &y);
        }
        sys.rhs(t, &y, &mut k1);
        let mut tmp = y;
        for i in 0..N {
            tmp[i] = y[i] + half * dt * k1[i];
        }
        sys.rhs(t + half * dt, &tmp, &mut k2);
        for i in 0..N {
            tmp[i] = y[i] + half * dt * k2[i];
        }
        sys.rhs(t + half * dt, &tmp, &mut k3);
        for i in 0..N {
            tmp[i] = y[i] + dt * k3[i];
        }
        sys.rhs(t + dt, &tmp, &mut k4);
        let dw = noise(t, dt);
        for i in 0..N {
            y[i] = y[i] + dt * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]) + dw[i];
        }
        obs.after_step(t + dt, &mut y);
    }
    if steps % steps_per_sample == 0 {
        obs.sample(t0 + dt * T::from_usize_lossy(steps), &y);
    }
    y
}
