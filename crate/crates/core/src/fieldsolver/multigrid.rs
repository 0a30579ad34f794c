//! Geometric multigrid V-cycles for the 5-point Laplacian with Dirichlet edges.
//!
//! Solves the same discrete problem as [`super::sor`] and stops on the same residual,
//! so either solver satisfies the basis contract.

use super::sor::{self, SorReport};
use crate::grid::ScalarGrid;

/// Cap on V-cycles before handing over to SOR.
pub const MAX_CYCLES: usize = 200;
const PRE_SMOOTH: usize = 2;
const POST_SMOOTH: usize = 2;
/// Coarsening stops once either side would drop below this many cells.
const MIN_CELLS: usize = 4;

struct Level {
    nx: usize,
    ny: usize,
    u: Vec<f64>,
    b: Vec<f64>,
}

impl Level {
    fn new(nx: usize, ny: usize) -> Self {
        let n = (nx + 1) * (ny + 1);
        Self { nx, ny, u: vec![0.0; n], b: vec![0.0; n] }
    }
}

/// Number of coarser levels available below an `nx × ny`-cell grid.
pub fn depth(nx: usize, ny: usize) -> usize {
    let (mut nx, mut ny, mut d) = (nx, ny, 0);
    while nx % 2 == 0 && ny % 2 == 0 && nx / 2 >= MIN_CELLS && ny / 2 >= MIN_CELLS {
        nx /= 2;
        ny /= 2;
        d += 1;
    }
    d
}

/// Solve in place with V-cycles; `iterations` in the report counts cycles.
///
/// Falls back to SOR when the grid cannot be coarsened at least twice.
pub fn solve(phi: &mut ScalarGrid, tol: f64, max_cycles: usize) -> SorReport {
    let spec = phi.spec;
    if depth(spec.nx, spec.ny) < 2 {
        return sor::solve(phi, tol, sor::MAX_ITERATIONS);
    }
    let scale = phi.max_abs().max(f64::MIN_POSITIVE);
    let mut levels = vec![Level { nx: spec.nx, ny: spec.ny, u: std::mem::take(&mut phi.values), b: vec![0.0; spec.len()] }];
    loop {
        let l = levels.last().unwrap();
        if l.nx % 2 != 0 || l.ny % 2 != 0 || l.nx / 2 < MIN_CELLS || l.ny / 2 < MIN_CELLS {
            break;
        }
        let (nx, ny) = (l.nx / 2, l.ny / 2);
        levels.push(Level::new(nx, ny));
    }

    let mut cycles = 0;
    let mut res = residual_max(&levels[0]);
    while res > tol * scale && cycles < max_cycles {
        v_cycle(&mut levels, 0);
        cycles += 1;
        res = residual_max(&levels[0]);
    }
    phi.values = std::mem::take(&mut levels[0].u);
    if res > tol * scale {
        let rep = sor::solve(phi, tol, sor::MAX_ITERATIONS);
        return SorReport { iterations: cycles + rep.iterations, ..rep };
    }
    SorReport { iterations: cycles, residual: res, converged: true }
}

fn v_cycle(levels: &mut [Level], k: usize) {
    if k + 1 == levels.len() {
        let l = &mut levels[k];
        let n = l.nx.max(l.ny) as f64;
        let omega = 2.0 / (1.0 + (std::f64::consts::PI / n).sin());
        relax(l, omega, 4 * (l.nx + l.ny));
        return;
    }
    relax(&mut levels[k], 1.0, PRE_SMOOTH);
    let r = residual(&levels[k]);
    let (fine, coarse) = levels.split_at_mut(k + 1);
    let (f, c) = (&fine[k], &mut coarse[0]);
    restrict(&r, f.nx, c);
    c.u.iter_mut().for_each(|v| *v = 0.0);
    v_cycle(levels, k + 1);
    let (fine, coarse) = levels.split_at_mut(k + 1);
    prolong_add(&coarse[0], &mut fine[k]);
    relax(&mut levels[k], 1.0, POST_SMOOTH);
}

// red-black sweeps of u ← u + ω((ΣN − b)/4 − u) over interior nodes
fn relax(l: &mut Level, omega: f64, sweeps: usize) {
    let cols = l.nx + 1;
    for _ in 0..sweeps {
        for color in 0..2 {
            for j in 1..l.ny {
                let row = j * cols;
                let mut i = 1 + (j + color + 1) % 2;
                while i < l.nx {
                    let k = row + i;
                    let gs = 0.25 * (l.u[k - 1] + l.u[k + 1] + l.u[k - cols] + l.u[k + cols] - l.b[k]);
                    l.u[k] += omega * (gs - l.u[k]);
                    i += 2;
                }
            }
        }
    }
}

// r = b − (ΣN u − 4u) on the interior, zero on the edges
fn residual(l: &Level) -> Vec<f64> {
    let cols = l.nx + 1;
    let mut r = vec![0.0; l.u.len()];
    for j in 1..l.ny {
        let row = j * cols;
        for i in 1..l.nx {
            let k = row + i;
            r[k] = l.b[k] - (l.u[k - 1] + l.u[k + 1] + l.u[k - cols] + l.u[k + cols] - 4.0 * l.u[k]);
        }
    }
    r
}

fn residual_max(l: &Level) -> f64 {
    residual(l).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

// full weighting; the factor 4 converts the unscaled operator from h to 2h
fn restrict(r: &[f64], fine_nx: usize, c: &mut Level) {
    let fc = fine_nx + 1;
    let cc = c.nx + 1;
    c.b.iter_mut().for_each(|v| *v = 0.0);
    for jc in 1..c.ny {
        for ic in 1..c.nx {
            let k = 2 * jc * fc + 2 * ic;
            let w = 4.0 * r[k]
                + 2.0 * (r[k - 1] + r[k + 1] + r[k - fc] + r[k + fc])
                + (r[k - fc - 1] + r[k - fc + 1] + r[k + fc - 1] + r[k + fc + 1]);
            c.b[jc * cc + ic] = 4.0 * w / 16.0;
        }
    }
}

// bilinear interpolation of the coarse correction onto interior fine nodes
fn prolong_add(c: &Level, f: &mut Level) {
    let fc = f.nx + 1;
    let cc = c.nx + 1;
    let e = |i: usize, j: usize| c.u[j * cc + i];
    for j in 1..f.ny {
        let (j0, jo) = (j / 2, j % 2);
        for i in 1..f.nx {
            let (i0, io) = (i / 2, i % 2);
            let v = match (io, jo) {
                (0, 0) => e(i0, j0),
                (1, 0) => 0.5 * (e(i0, j0) + e(i0 + 1, j0)),
                (0, 1) => 0.5 * (e(i0, j0) + e(i0, j0 + 1)),
                _ => 0.25 * (e(i0, j0) + e(i0 + 1, j0) + e(i0, j0 + 1) + e(i0 + 1, j0 + 1)),
            };
            f.u[j * fc + i] += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn boxed(nx: usize, ny: usize) -> ScalarGrid {
        // Dirichlet data from a harmonic function; the discrete solution is close to it
        let spec = GridSpec::new(nx, ny, 0.0, 0.0, 1.0 / nx as f64).unwrap();
        let f = |x: f64, y: f64| (3.0 * x).sin() * (3.0 * y).sinh() / 3f64.sinh();
        let mut g = ScalarGrid::zeros(spec);
        for j in 0..spec.rows() {
            for i in 0..spec.cols() {
                if spec.is_boundary(i, j) {
                    g.values[spec.idx(i, j)] = f(spec.x(i), spec.y(j));
                }
            }
        }
        g
    }

    #[test]
    fn agrees_with_sor() {
        let mut a = boxed(64, 48);
        let mut b = a.clone();
        let ra = solve(&mut a, 1e-10, MAX_CYCLES);
        let rb = sor::solve(&mut b, 1e-10, sor::MAX_ITERATIONS);
        assert!(ra.converged && rb.converged);
        assert!(ra.iterations < 30, "{} cycles", ra.iterations);
        let diff = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-7, "diff {diff}");
    }

    #[test]
    fn odd_grid_falls_back() {
        let mut a = boxed(33, 20);
        let r = solve(&mut a, 1e-9, MAX_CYCLES);
        assert!(r.converged);
        assert_eq!(depth(33, 20), 0);
        assert_eq!(depth(64, 48), 3);
    }
}
