//! Red-black successive over-relaxation for the 5-point Laplacian.

use crate::grid::ScalarGrid;

/// Iteration cap for a single solve.
pub const MAX_ITERATIONS: usize = 1_000_000;
/// Residual is checked every this many full sweeps.
const CHECK_EVERY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorReport {
    pub iterations: usize,
    /// Max |φ_E + φ_W + φ_N + φ_S − 4φ| over interior nodes.
    pub residual: f64,
    pub converged: bool,
}

/// Spectral radius of the Jacobi iteration on an `nx × ny`-cell Dirichlet rectangle.
pub fn jacobi_radius(nx: usize, ny: usize) -> f64 {
    use std::f64::consts::PI;
    0.5 * ((PI / nx as f64).cos() + (PI / ny as f64).cos())
}

/// Relax the interior of `phi` in place; boundary nodes hold the Dirichlet data.
///
/// Stops when the residual drops below `tol · max|φ|` or after `max_iter` sweeps.
/// The relaxation factor follows the Chebyshev schedule for the red-black ordering.
pub fn solve(phi: &mut ScalarGrid, tol: f64, max_iter: usize) -> SorReport {
    let spec = phi.spec;
    let (nx, ny) = (spec.nx, spec.ny);
    let cols = spec.cols();
    let rho = jacobi_radius(nx, ny);
    let rho2 = rho * rho;
    let scale = phi.max_abs().max(f64::MIN_POSITIVE);
    let v = &mut phi.values;

    let mut omega = 1.0;
    let mut first = true;
    let mut iterations = 0;
    let mut residual = interior_residual(v, cols, nx, ny);
    if residual <= tol * scale {
        return SorReport { iterations, residual, converged: true };
    }
    while iterations < max_iter {
        for color in 0..2 {
            for j in 1..ny {
                let row = j * cols;
                let start = 1 + (j + color + 1) % 2;
                let mut i = start;
                while i < nx {
                    let k = row + i;
                    let avg = 0.25 * (v[k - 1] + v[k + 1] + v[k - cols] + v[k + cols]);
                    v[k] += omega * (avg - v[k]);
                    i += 2;
                }
            }
            omega = if first {
                first = false;
                1.0 / (1.0 - 0.5 * rho2)
            } else {
                1.0 / (1.0 - 0.25 * rho2 * omega)
            };
        }
        iterations += 1;
        if iterations % CHECK_EVERY == 0 || iterations == max_iter {
            residual = interior_residual(v, cols, nx, ny);
            if residual <= tol * scale {
                return SorReport { iterations, residual, converged: true };
            }
        }
    }
    SorReport { iterations, residual, converged: false }
}

fn interior_residual(v: &[f64], cols: usize, nx: usize, ny: usize) -> f64 {
    let mut r: f64 = 0.0;
    for j in 1..ny {
        let row = j * cols;
        for i in 1..nx {
            let k = row + i;
            let res = v[k - 1] + v[k + 1] + v[k - cols] + v[k + cols] - 4.0 * v[k];
            r = r.max(res.abs());
        }
    }
    r
}

/// Residual of the discrete Laplace equation on an arbitrary grid.
pub fn residual(phi: &ScalarGrid) -> f64 {
    interior_residual(&phi.values, phi.spec.cols(), phi.spec.nx, phi.spec.ny)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn reaches_tolerance_on_harmonic_data() {
        // x² − y² is harmonic and exactly reproduced by the 5-point stencil
        let spec = GridSpec::new(60, 40, -1.0, 0.0, 1.0 / 30.0).unwrap();
        let exact = ScalarGrid::from_fn(spec, |x, y| x * x - y * y);
        let mut phi = exact.clone();
        for j in 1..spec.ny {
            for i in 1..spec.nx {
                phi.values[spec.idx(i, j)] = 0.0;
            }
        }
        let rep = solve(&mut phi, 1e-12, MAX_ITERATIONS);
        assert!(rep.converged);
        let err = phi.values.iter().zip(&exact.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn reports_non_convergence() {
        let spec = GridSpec::new(50, 50, 0.0, 0.0, 0.02).unwrap();
        let mut phi = ScalarGrid::from_fn(spec, |_, y| if y >= 1.0 - 1e-12 { 1.0 } else { 0.0 });
        let rep = solve(&mut phi, 1e-14, 3);
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert!(rep.residual > 0.0);
    }
}
