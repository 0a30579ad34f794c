//! Explicit Runge–Kutta integrators on fixed-size state arrays.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} (h = {h:e}) after {steps} steps")]
    StepUnderflow { t: f64, h: f64, steps: usize },
    #[error("step limit {steps} reached at t = {t:e}")]
    MaxSteps { t: f64, steps: usize },
    #[error("non-finite state at t = {t:e}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome<const N: usize> {
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) from `t0` to `t1` with step-size control; returns the state at `t1`.
pub fn dopri5<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: Tolerances,
) -> Result<Outcome<N>, OdeError> {
    let span = t1 - t0;
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = 0.01 * span.abs().max(f64::MIN_POSITIVE);
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y);
    let (mut accepted, mut rejected) = (0, 0);

    while dir * (t1 - t) > 0.0 {
        if accepted + rejected >= tol.max_steps {
            return Err(OdeError::MaxSteps { t, steps: accepted + rejected });
        }
        let last = h >= (t1 - t).abs();
        let step = if last { t1 - t } else { dir * h };
        for s in 1..7 {
            let mut ys = y;
            for (n, v) in ys.iter_mut().enumerate() {
                *v += step * (0..s).map(|r| A[s][r] * k[r][n]).sum::<f64>();
            }
            k[s] = f(t + C[s] * step, &ys);
        }
        let mut y_new = y;
        for (n, v) in y_new.iter_mut().enumerate() {
            *v += step * (0..6).map(|r| A[6][r] * k[r][n]).sum::<f64>();
        }
        let mut err = 0.0;
        for n in 0..N {
            let e = step * (0..7).map(|r| E[r] * k[r][n]).sum::<f64>();
            let sc = tol.atol + tol.rtol * y[n].abs().max(y_new[n].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            return Err(OdeError::NonFinite { t });
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y_new;
            // first-same-as-last: the seventh stage is f at the new point
            k[0] = k[6];
            accepted += 1;
            h = step.abs() * factor;
        } else {
            rejected += 1;
            h = step.abs() * factor.min(1.0);
        }
        if h < 1e-14 * t.abs().max(span.abs()) {
            return Err(OdeError::StepUnderflow { t, h, steps: accepted + rejected });
        }
    }
    Ok(Outcome { y, accepted, rejected })
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    dt: f64,
) -> [f64; N] {
    let axpy = |a: &[f64; N], k: &[f64; N], s: f64| {
        let mut o = *a;
        o.iter_mut().zip(k).for_each(|(o, k)| *o += s * k);
        o
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, &axpy(y, &k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &axpy(y, &k2, 0.5 * dt));
    let k4 = f(t + dt, &axpy(y, &k3, dt));
    let mut o = *y;
    for n in 0..N {
        o[n] += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_full_period() {
        let out = dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], std::f64::consts::TAU, Tolerances::default())
            .unwrap();
        assert!((out.y[0] - 1.0).abs() < 1e-10 && out.y[1].abs() < 1e-10, "{:?}", out.y);
    }

    #[test]
    fn exponential_decay_backward_and_forward() {
        let f = |_: f64, y: &[f64; 1]| [-3.0 * y[0]];
        let fwd = dopri5(f, 0.0, [1.0], 2.0, Tolerances::default()).unwrap();
        assert!((fwd.y[0] - (-6.0f64).exp()).abs() < 1e-13);
        let back = dopri5(f, 2.0, fwd.y, 0.0, Tolerances::default()).unwrap();
        assert!((back.y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_limit_reported() {
        let tol = Tolerances { max_steps: 3, ..Tolerances::default() };
        let r = dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 100.0, tol);
        assert!(matches!(r, Err(OdeError::MaxSteps { .. })));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut y = [1.0, 0.0];
            for i in 0..n {
                y = rk4_step(|_, y: &[f64; 2]| [y[1], -y[0]], i as f64 * dt, &y, dt);
            }
            (y[0] - 1.0f64.cos()).abs()
        };
        let ratio = run(20) / run(40);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }
}
