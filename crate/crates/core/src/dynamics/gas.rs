//! Slip-corrected Stokes drag in a rarefied gas.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::geometry::IonSpecies;

/// Dynamic viscosity of air (kg m⁻¹ s⁻¹).
pub const AIR_VISCOSITY: f64 = 1.83e-5;
/// Mean free path of air at the reference pressure (m).
pub const AIR_MFP_REF: f64 = 67.3e-9;
pub const MFP_REF_PRESSURE: f64 = 1e5;
/// Molar mass of dry air (kg/mol).
const AIR_MOLAR_MASS: f64 = 0.028_965;
const GAS_CONSTANT: f64 = 8.314_462_618;
const ROOM_TEMPERATURE: f64 = 295.0;
/// Reynolds number above which Stokes drag is flagged as questionable.
pub const REYNOLDS_ADVISORY: f64 = 0.1;

/// `C = 1 + Kn·(1.165 + 0.483·exp(−0.997/Kn))`, with `C(0) = 1`.
pub fn slip_correction(kn: f64) -> f64 {
    if kn <= 0.0 {
        return 1.0;
    }
    1.0 + kn * (1.165 + 0.483 * (-0.997 / kn).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    /// Pa.
    pub pressure: f64,
    /// Dynamic viscosity (kg m⁻¹ s⁻¹).
    pub mu: f64,
    /// Mean free path at `pressure` (m).
    pub mean_free_path: f64,
    /// kg/m³.
    pub density: f64,
}

impl GasModel {
    /// Room-temperature air, mean free path scaled as 1/p from 67.3 nm at 10⁵ Pa.
    pub fn air(pressure: f64) -> Result<Self, DynamicsError> {
        if !(pressure > 0.0) || !pressure.is_finite() {
            return Err(DynamicsError::InvalidModel("pressure must be positive"));
        }
        Ok(Self {
            pressure,
            mu: AIR_VISCOSITY,
            mean_free_path: AIR_MFP_REF * MFP_REF_PRESSURE / pressure,
            density: pressure * AIR_MOLAR_MASS / (GAS_CONSTANT * ROOM_TEMPERATURE),
        })
    }

    pub fn new(pressure: f64, mu: f64, mean_free_path: f64, density: f64) -> Result<Self, DynamicsError> {
        for v in [pressure, mu, mean_free_path, density] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DynamicsError::InvalidModel("gas parameters must be positive"));
            }
        }
        Ok(Self { pressure, mu, mean_free_path, density })
    }

    /// `λ/R`; infinite for a point particle.
    pub fn knudsen(&self, radius: f64) -> f64 {
        self.mean_free_path / radius
    }

    /// Velocity damping rate `γ = 6πμR/(C·m)` (1/s); zero for a point ion.
    pub fn gamma(&self, ion: &IonSpecies) -> f64 {
        if ion.radius <= 0.0 {
            return 0.0;
        }
        6.0 * PI * self.mu * ion.radius / (slip_correction(self.knudsen(ion.radius)) * ion.mass)
    }

    /// `N_Re = 2ρ|v|R/μ`.
    pub fn reynolds(&self, ion: &IonSpecies, speed: f64) -> f64 {
        2.0 * self.density * speed.abs() * ion.radius / self.mu
    }

    /// Logs a warning when the Stokes regime is doubtful; returns the Reynolds number.
    pub fn check_reynolds(&self, ion: &IonSpecies, speed: f64) -> f64 {
        let re = self.reynolds(ion, speed);
        if re > REYNOLDS_ADVISORY {
            log::warn!("Reynolds number {re:.3} exceeds {REYNOLDS_ADVISORY}; Stokes drag may be inaccurate");
        }
        re
    }
}

/// `F = −6πμR·v/C(Kn)` (N).
pub fn drag_force(ion: &IonSpecies, gas: &GasModel, velocity: [f64; 2]) -> [f64; 2] {
    let k = gas.gamma(ion) * ion.mass;
    [-k * velocity[0], -k * velocity[1]]
}
