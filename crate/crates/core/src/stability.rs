//! Floquet stability of `x'' + b·x' + (a − 2q·cos 2τ)·x = 0`.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::GasModel;
use crate::geometry::IonSpecies;
use crate::ode::{dopri5, OdeError, Tolerances};

/// Multiplier magnitudes up to `1 + STABILITY_TOL` count as bounded.
pub const STABILITY_TOL: f64 = 1e-9;
/// `q_max` of the undamped first region, used when no gas model is given.
pub const QMAX_UNDAMPED: f64 = 0.908;
pub const QMAX_BRACKET: (f64, f64) = (0.5, 2.0);
pub const QMAX_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("integration over one period failed: {0}")]
    Integrator(#[from] OdeError),
    #[error("stability does not change across q in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("parameters must be finite")]
    NonFinite,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MathieuParams {
    pub a: f64,
    pub q: f64,
    /// Dimensionless drag, b ≥ 0.
    pub b: f64,
}

impl MathieuParams {
    pub fn new(a: f64, q: f64, b: f64) -> Self {
        Self { a, q, b }
    }
}

/// `q = 2QV/(m r0² Ω²)`, `a = 4QU/(m r0² Ω²)`; drag left at zero.
pub fn mathieu_params(
    ion: &IonSpecies,
    v: f64,
    u_quad: f64,
    r0: f64,
    omega: f64,
) -> Result<MathieuParams, StabilityError> {
    if !(r0 > 0.0) {
        return Err(StabilityError::NonPositive("r0"));
    }
    if !(omega > 0.0) {
        return Err(StabilityError::NonPositive("Omega"));
    }
    let k = ion.charge / (ion.mass * r0 * r0 * omega * omega);
    Ok(MathieuParams { a: 4.0 * k * u_quad, q: 2.0 * k * v, b: 0.0 })
}

/// `b = 2γ/Ω = 12πμR/(C m Ω)`.
pub fn drag_b(gas: &GasModel, ion: &IonSpecies, omega: f64) -> Result<f64, StabilityError> {
    if !(omega > 0.0) {
        return Err(StabilityError::NonPositive("Omega"));
    }
    Ok(2.0 * gas.gamma(ion) / omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityResult {
    pub stable: bool,
    pub floquet_magnitudes: [f64; 2],
    /// Fundamental matrix after one period, row-major.
    pub monodromy: [[f64; 2]; 2],
}

/// Fundamental matrix after τ = π (the period of cos 2τ).
pub fn monodromy(p: &MathieuParams, tol: Tolerances) -> Result<[[f64; 2]; 2], StabilityError> {
    if !(p.a.is_finite() && p.q.is_finite() && p.b.is_finite()) {
        return Err(StabilityError::NonFinite);
    }
    let rhs = |t: f64, y: &[f64; 2]| [y[1], -p.b * y[1] - (p.a - 2.0 * p.q * (2.0 * t).cos()) * y[0]];
    let c1 = dopri5(rhs, 0.0, [1.0, 0.0], PI, tol)?.y;
    let c2 = dopri5(rhs, 0.0, [0.0, 1.0], PI, tol)?.y;
    Ok([[c1[0], c2[0]], [c1[1], c2[1]]])
}

/// Magnitudes of the eigenvalues of a real 2×2 matrix, larger first.
pub fn multiplier_magnitudes(m: &[[f64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        let r = det.abs().sqrt();
        [r, r]
    } else {
        let s = disc.sqrt();
        let (l1, l2) = (0.5 * (tr + s), 0.5 * (tr - s));
        let (a, b) = (l1.abs(), l2.abs());
        if a >= b { [a, b] } else { [b, a] }
    }
}

pub fn is_stable(p: &MathieuParams) -> Result<StabilityResult, StabilityError> {
    is_stable_with(p, Tolerances::default())
}

pub fn is_stable_with(p: &MathieuParams, tol: Tolerances) -> Result<StabilityResult, StabilityError> {
    let m = monodromy(p, tol)?;
    let mags = multiplier_magnitudes(&m);
    Ok(StabilityResult { stable: mags[0] <= 1.0 + STABILITY_TOL, floquet_magnitudes: mags, monodromy: m })
}

/// Edge of the first stability region along q at fixed a and b.
pub fn qmax(a: f64, b: f64) -> Result<f64, StabilityError> {
    qmax_in(a, b, QMAX_BRACKET, QMAX_TOL, Tolerances::default())
}

pub fn qmax_in(a: f64, b: f64, bracket: (f64, f64), q_tol: f64, tol: Tolerances) -> Result<f64, StabilityError> {
    let (mut lo, mut hi) = bracket;
    let stable = |q: f64| is_stable_with(&MathieuParams::new(a, q, b), tol).map(|r| r.stable);
    if !stable(lo)? || stable(hi)? {
        return Err(StabilityError::NoBracket { lo, hi });
    }
    while hi - lo > q_tol {
        let mid = 0.5 * (lo + hi);
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
