//! Drag-limited transit across a linear potential ramp.

use serde::{Deserialize, Serialize};

use super::{DynamicsError, GasModel};
use crate::geometry::IonSpecies;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuttleModel {
    /// Ramp field E (V/m).
    pub e_field: f64,
    /// Ramp length d (m).
    pub length: f64,
    /// Velocity damping rate γ (1/s); zero is the ballistic limit.
    pub gamma: f64,
}

impl ShuttleModel {
    pub fn new(e_field: f64, length: f64, gamma: f64) -> Result<Self, DynamicsError> {
        if !(e_field > 0.0 && length > 0.0) || !(gamma >= 0.0) || !(e_field + length + gamma).is_finite() {
            return Err(DynamicsError::InvalidModel("E and d must be positive, gamma nonnegative"));
        }
        Ok(Self { e_field, length, gamma })
    }

    pub fn from_gas(e_field: f64, length: f64, gas: &GasModel, ion: &IonSpecies) -> Result<Self, DynamicsError> {
        Self::new(e_field, length, gas.gamma(ion))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShuttleSolution {
    /// Time to reach z = d (s).
    pub t_d: f64,
    /// ż at z = d (m/s).
    pub exit_velocity: f64,
    /// `c = γ·t_d`.
    pub c: f64,
    /// `QE/(γm)`; infinite without drag.
    pub terminal_velocity: f64,
}

// x + e^{-x} - 1, accurate for small x
fn excess(x: f64) -> f64 {
    if x < 1e-2 {
        let mut term = x * x / 2.0;
        let mut sum = 0.0;
        for n in 2..12 {
            sum += term;
            term *= -x / (n as f64 + 1.0);
        }
        sum
    } else {
        x + (-x).exp_m1()
    }
}

/// Solves `d = (QE/γm)(t_d + (e^{−γt_d} − 1)/γ)` for `t_d`.
pub fn shuttle_time(model: &ShuttleModel, ion: &IonSpecies) -> Result<ShuttleSolution, DynamicsError> {
    let a = ion.charge * model.e_field / ion.mass;
    if !(a > 0.0) {
        return Err(DynamicsError::InvalidModel("force QE must push toward +z"));
    }
    let g = model.gamma;
    if g == 0.0 {
        let t = (2.0 * model.length / a).sqrt();
        return Ok(ShuttleSolution { t_d: t, exit_velocity: a * t, c: 0.0, terminal_velocity: f64::INFINITY });
    }
    // with x = γ t_d: x + e^{-x} - 1 = κ
    let kappa = model.length * g * g / a;
    let (mut lo, mut hi) = (0.0, kappa + 1.0 + (2.0 * kappa).sqrt());
    if !(excess(hi) >= kappa) {
        return Err(DynamicsError::NoRoot { lo, hi });
    }
    let mut x = if kappa < 1.0 { (2.0 * kappa).sqrt() } else { kappa + 1.0 };
    for _ in 0..200 {
        let f = excess(x) - kappa;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let df = -(-x).exp_m1();
        let mut next = x - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * next {
            x = next;
            break;
        }
        x = next;
    }
    let t_d = x / g;
    let vt = a / g;
    Ok(ShuttleSolution { t_d, exit_velocity: vt * -(-x).exp_m1(), c: x, terminal_velocity: vt })
}

/// Dimensionless drag `c = γ·t_d`.
pub fn drag_c(model: &ShuttleModel, ion: &IonSpecies) -> Result<f64, DynamicsError> {
    Ok(shuttle_time(model, ion)?.c)
}
