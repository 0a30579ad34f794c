//! Independent closed-form oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use planar_trap::fieldsolver::sor;
use planar_trap::grid::{GridSpec, ScalarGrid};

/// Potential of a strip of width `w` at 1 V, centered on x = 0, in an otherwise grounded plane.
pub fn strip_potential(w: f64, x: f64, y: f64) -> f64 {
    (((0.5 * w - x) / y).atan() + ((0.5 * w + x) / y).atan()) / PI
}

/// Analytic gradient of [`strip_potential`].
pub fn strip_gradient(w: f64, x: f64, y: f64) -> [f64; 2] {
    let a = 0.5 * w - x;
    let b = 0.5 * w + x;
    let da2 = a * a + y * y;
    let db2 = b * b + y * y;
    // d/dx atan(a/y) = -y/(a²+y²), d/dy atan(a/y) = -a/(a²+y²)
    let gx = (-y / da2 + y / db2) / PI;
    let gy = (-a / da2 - b / db2) / PI;
    [gx, gy]
}

/// Grid of half-width `half`, height `height`, spacing `h`.
pub fn box_grid(half: f64, height: f64, h: f64) -> GridSpec {
    let nxh = (half / h).round() as usize;
    let ny = (height / h).round() as usize;
    GridSpec::new(2 * nxh, ny, -(nxh as f64) * h, 0.0, h).unwrap()
}

/// Strip problem solved by the crate's SOR with the analytic solution imposed on the box walls.
pub fn solve_strip(w: f64, half: f64, height: f64, h: f64, tol: f64) -> ScalarGrid {
    let spec = box_grid(half, height, h);
    let mut g = ScalarGrid::zeros(spec);
    for j in 0..spec.rows() {
        for i in 0..spec.cols() {
            if !spec.is_boundary(i, j) {
                continue;
            }
            let (x, y) = (spec.x(i), spec.y(j));
            let v = if j == 0 {
                let d = x.abs() - 0.5 * w;
                if d.abs() < 1e-12 * w {
                    0.5
                } else if d < 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                strip_potential(w, x, y)
            };
            g.values[spec.idx(i, j)] = v;
        }
    }
    let rep = sor::solve(&mut g, tol, sor::MAX_ITERATIONS);
    assert!(rep.converged);
    g
}

/// Max relative error against the strip oracle over nodes higher than `min_cells` cells.
pub fn strip_max_rel_error(g: &ScalarGrid, w: f64, min_cells: f64) -> f64 {
    let s = g.spec;
    let mut worst: f64 = 0.0;
    for j in 0..s.rows() {
        for i in 0..s.cols() {
            let (x, y) = (s.x(i), s.y(j));
            if s.is_boundary(i, j) || y <= min_cells * s.spacing {
                continue;
            }
            let exact = strip_potential(w, x, y);
            worst = worst.max((g.at(i, j) - exact).abs() / exact.abs());
        }
    }
    worst
}

/// Ideal quadrupole RF potential per volt: (x² − y²)/(2 r0²), centred at (0, y0).
pub fn quadrupole(r0: f64, y0: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| (x * x - (y - y0) * (y - y0)) / (2.0 * r0 * r0)
}

fn rk4<const N: usize>(f: &impl Fn(f64, &[f64; N]) -> [f64; N], t: f64, y: &[f64; N], h: f64) -> [f64; N] {
    let add = |a: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| a[i] + s * k[i]) };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = f(t + h, &add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Monodromy of `x'' + b x' + (a − 2q cos 2τ) x = 0` over τ ∈ [0, π] by fixed-step RK4.
pub fn mathieu_monodromy(a: f64, q: f64, b: f64, steps: usize) -> [[f64; 2]; 2] {
    let f = |t: f64, y: &[f64; 2]| [y[1], -b * y[1] - (a - 2.0 * q * (2.0 * t).cos()) * y[0]];
    let h = PI / steps as f64;
    let mut cols = [[1.0, 0.0], [0.0, 1.0]];
    for c in &mut cols {
        for k in 0..steps {
            *c = rk4(&f, k as f64 * h, c, h);
        }
    }
    [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
}

/// Bounded when both Floquet multipliers lie inside the unit circle.
pub fn mathieu_bounded(a: f64, q: f64, b: f64) -> bool {
    let m = mathieu_monodromy(a, q, b, 4000);
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    let rho = if disc < 0.0 { det.abs().sqrt() } else { 0.5 * (tr.abs() + disc.sqrt()) };
    rho <= 1.0 + 1e-9
}

/// First-region edge along q by bisection on [q_lo, q_hi], which must bracket it.
pub fn mathieu_qmax(a: f64, b: f64, q_lo: f64, q_hi: f64) -> f64 {
    let (mut lo, mut hi) = (q_lo, q_hi);
    assert!(mathieu_bounded(a, lo, b) && !mathieu_bounded(a, hi, b));
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if mathieu_bounded(a, mid, b) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `z'' = acc − γ z'` from rest at z = 0, integrated until z = d.
/// Returns (t_d, ż(t_d)); the crossing is located on the cubic Hermite interpolant.
pub fn shuttle_ode(acc: f64, gamma: f64, d: f64, steps_guess: usize) -> (f64, f64) {
    let f = |_t: f64, y: &[f64; 2]| [y[1], acc - gamma * y[1]];
    // time scale: ballistic or terminal-velocity transit, whichever is longer
    let t_est = (2.0 * d / acc).sqrt().max(d * gamma / acc);
    let h = t_est / steps_guess as f64;
    let (mut t, mut y) = (0.0, [0.0, 0.0]);
    loop {
        let next = rk4(&f, t, &y, h);
        if next[0] >= d {
            // Hermite cubic on [t, t + h] in s ∈ [0, 1]
            let (p0, p1, m0, m1) = (y[0], next[0], y[1] * h, next[1] * h);
            let z = |s: f64| {
                let (s2, s3) = (s * s, s * s * s);
                (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if z(mid) < d {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s = 0.5 * (lo + hi);
            let tc = t + s * h;
            let v = rk4(&f, t, &y, s * h)[1];
            return (tc, v);
        }
        t += h;
        y = next;
    }
}

/// Slip correction `1 + Kn(1.165 + 0.483 e^{−0.997/Kn})`, written out independently.
pub fn cunningham(kn: f64) -> f64 {
    1.0 + kn * (1.165 + 0.483 * (-0.997 / kn).exp())
}
