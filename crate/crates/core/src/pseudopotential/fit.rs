//! Harmonic frequencies from a least-squares polynomial fit of ψ near the minimum.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use serde::Serialize;

use super::{Minimum, PseudoError};
use crate::geometry::IonSpecies;
use crate::grid::ScalarGrid;

/// Fit radius as a fraction of r0.
pub const DEFAULT_FIT_WINDOW: f64 = 0.05;
/// Floor on the fit radius in grid cells, so coarse grids still give an overdetermined fit.
pub const MIN_FIT_CELLS: f64 = 4.0;
/// Total degree of the fitted polynomial; the cubic and quartic terms absorb anharmonicity.
const FIT_DEGREE: usize = 4;
const N_TERMS: usize = (FIT_DEGREE + 1) * (FIT_DEGREE + 2) / 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecularFrequencies {
    /// Mode whose axis lies closer to x (rad/s).
    pub omega_x: f64,
    pub omega_y: f64,
    /// Angle of the x-like principal axis from the x axis (rad).
    pub axis_angle: f64,
    /// Hessian eigenvalues (J/m²), x-like mode first.
    pub curvature: [f64; 2],
    pub fit_radius: f64,
    pub fit_nodes: usize,
}

impl SecularFrequencies {
    pub fn as_array(&self) -> [f64; 2] {
        [self.omega_x, self.omega_y]
    }
}

/// `ω_i = √(λ_i/m)` for the eigenvalues λ_i of the fitted Hessian.
pub fn secular_frequencies(
    psi: &ScalarGrid,
    min: &Minimum,
    ion: &IonSpecies,
    window: f64,
) -> Result<SecularFrequencies, PseudoError> {
    let s = psi.spec;
    let h = s.spacing;
    let radius = (window * min.y.abs()).max(MIN_FIT_CELLS * h);
    let reach = (radius / h).ceil() as i64 + 1;
    let (ci, cj) = (min.node.0 as i64, min.node.1 as i64);

    let mut rows: Vec<[f64; N_TERMS]> = Vec::new();
    let mut rhs = Vec::new();
    for j in (cj - reach)..=(cj + reach) {
        for i in (ci - reach)..=(ci + reach) {
            if i < 0 || j < 0 || i >= s.cols() as i64 || j >= s.rows() as i64 {
                continue;
            }
            let (i, j) = (i as usize, j as usize);
            // coordinates in cells relative to the refined minimum
            let x = (s.x(i) - min.x) / h;
            let y = (s.y(j) - min.y) / h;
            if (x * x + y * y).sqrt() * h > radius {
                continue;
            }
            rows.push(monomials(x, y));
            rhs.push(psi.at(i, j));
        }
    }
    if rows.len() < 2 * N_TERMS {
        return Err(PseudoError::IllConditioned("too few nodes in the fit window"));
    }
    let a = DMatrix::from_fn(rows.len(), N_TERMS, |r, c| rows[r][c]);
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let b = DVector::from_iterator(rhs.len(), rhs.iter().map(|v| v / scale));
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-10 * sv.max() {
        return Err(PseudoError::IllConditioned("rank-deficient design matrix"));
    }
    let c = svd.solve(&b, 0.0).map_err(|_| PseudoError::IllConditioned("SVD solve failed"))?;

    let coef: Vec<f64> = c.iter().copied().collect();
    let at = stationary_point(&coef, radius / h);
    let (_, hc) = poly_derivs(&coef, at);
    let hess = hc * (scale / (h * h));
    let eig = SymmetricEigen::new(hess);
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if l0 <= 0.0 || l1 <= 0.0 {
        return Err(PseudoError::SaddleNotMinimum(l0, l1));
    }
    let v0 = eig.eigenvectors.column(0);
    let (xi, yi) = if v0[0].abs() >= v0[1].abs() { (0, 1) } else { (1, 0) };
    let vx = eig.eigenvectors.column(xi);
    let mut angle = vx[1].atan2(vx[0]);
    // axes are undirected; keep the angle in (-π/2, π/2]
    if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    } else if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    }
    let lam = [eig.eigenvalues[xi], eig.eigenvalues[yi]];
    Ok(SecularFrequencies {
        omega_x: (lam[0] / ion.mass).sqrt(),
        omega_y: (lam[1] / ion.mass).sqrt(),
        axis_angle: angle,
        curvature: lam,
        fit_radius: radius,
        fit_nodes: rows.len(),
    })
}

// Gradient and Hessian of the fitted polynomial at `p` (cell units).
fn poly_derivs(c: &[f64], p: [f64; 2]) -> ([f64; 2], Matrix2<f64>) {
    let pw = |v: f64, n: i32| if n < 0 { 0.0 } else { v.powi(n) };
    let (mut g, mut hm) = ([0.0; 2], Matrix2::zeros());
    let mut k = 0;
    for deg in 0..=FIT_DEGREE as i32 {
        for b in 0..=deg {
            let a = deg - b;
            let (af, bf) = (a as f64, b as f64);
            g[0] += c[k] * af * pw(p[0], a - 1) * pw(p[1], b);
            g[1] += c[k] * bf * pw(p[0], a) * pw(p[1], b - 1);
            hm[(0, 0)] += c[k] * af * (af - 1.0) * pw(p[0], a - 2) * pw(p[1], b);
            hm[(1, 1)] += c[k] * bf * (bf - 1.0) * pw(p[0], a) * pw(p[1], b - 2);
            let mixed = c[k] * af * bf * pw(p[0], a - 1) * pw(p[1], b - 1);
            hm[(0, 1)] += mixed;
            hm[(1, 0)] += mixed;
            k += 1;
        }
    }
    (g, hm)
}

// Newton on the fitted polynomial from the expansion point; stays put if it wanders out of the window.
fn stationary_point(c: &[f64], reach: f64) -> [f64; 2] {
    let mut p = [0.0, 0.0];
    for _ in 0..50 {
        let (g, hm) = poly_derivs(c, p);
        let Some(inv) = hm.try_inverse() else { return [0.0, 0.0] };
        let step = [inv[(0, 0)] * g[0] + inv[(0, 1)] * g[1], inv[(1, 0)] * g[0] + inv[(1, 1)] * g[1]];
        p = [p[0] - step[0], p[1] - step[1]];
        if (p[0] * p[0] + p[1] * p[1]).sqrt() > reach {
            return [0.0, 0.0];
        }
        if step[0].abs().max(step[1].abs()) < 1e-12 {
            break;
        }
    }
    p
}

// 1, x, y, x², xy, y², x³, ... ordered by total degree
fn monomials(x: f64, y: f64) -> [f64; N_TERMS] {
    let mut m = [0.0; N_TERMS];
    let mut k = 0;
    for deg in 0..=FIT_DEGREE {
        for py in 0..=deg {
            m[k] = x.powi((deg - py) as i32) * y.powi(py as i32);
            k += 1;
        }
    }
    m
}
