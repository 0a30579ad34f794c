//! One-dimensional axial model: control electrodes with trapezoidal potential profiles.

use serde::{Deserialize, Serialize};

use super::{DynamicsError, Waveform};
use crate::geometry::IonSpecies;
use crate::ode::rk4_step;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxialElectrode {
    pub id: String,
    /// Axial center (m).
    pub center: f64,
    /// Plateau width (m).
    pub width: f64,
}

/// Each electrode contributes its voltage on its plateau, falling linearly to zero over `ramp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxialModel {
    pub electrodes: Vec<AxialElectrode>,
    pub ramp: f64,
}

impl AxialModel {
    /// `n` equal electrodes of pitch `pitch` starting at z = 0, ids `c0..`.
    pub fn uniform(n: usize, pitch: f64, ramp: f64) -> Result<Self, DynamicsError> {
        if !(pitch > ramp && ramp > 0.0) {
            return Err(DynamicsError::InvalidModel("need pitch > ramp > 0"));
        }
        let electrodes = (0..n)
            .map(|k| AxialElectrode { id: format!("c{k}"), center: k as f64 * pitch, width: pitch - ramp })
            .collect();
        Ok(Self { electrodes, ramp })
    }

    pub fn ids(&self) -> Vec<&str> {
        self.electrodes.iter().map(|e| e.id.as_str()).collect()
    }

    // kernel value and slope at z for one electrode
    fn kernel(&self, e: &AxialElectrode, z: f64) -> (f64, f64) {
        let off = (z - e.center).abs() - 0.5 * e.width;
        if off <= 0.0 {
            (1.0, 0.0)
        } else if off < self.ramp {
            (1.0 - off / self.ramp, -(z - e.center).signum() / self.ramp)
        } else {
            (0.0, 0.0)
        }
    }

    pub fn potential(&self, wave: &Waveform, z: f64, t: f64) -> f64 {
        self.electrodes
            .iter()
            .map(|e| wave.voltage(&e.id, t).unwrap_or(0.0) * self.kernel(e, z).0)
            .sum()
    }

    /// `−∂φ/∂z` (V/m).
    pub fn field(&self, wave: &Waveform, z: f64, t: f64) -> f64 {
        -self
            .electrodes
            .iter()
            .map(|e| wave.voltage(&e.id, t).unwrap_or(0.0) * self.kernel(e, z).1)
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxialTrajectory {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

impl AxialTrajectory {
    pub fn max_speed(&self) -> f64 {
        self.v.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First time z crosses `level` going up, linearly interpolated, with the speed there.
    pub fn crossing(&self, level: f64) -> Option<(f64, f64)> {
        (1..self.z.len()).find(|&k| self.z[k - 1] < level && self.z[k] >= level).map(|k| {
            let f = (level - self.z[k - 1]) / (self.z[k] - self.z[k - 1]);
            (self.t[k - 1] + f * (self.t[k] - self.t[k - 1]), self.v[k - 1] + f * (self.v[k] - self.v[k - 1]))
        })
    }
}

/// RK4 in `z` with linear drag `γ`.
pub fn simulate_axial(
    model: &AxialModel,
    wave: &Waveform,
    ion: &IonSpecies,
    gamma: f64,
    z0: f64,
    v0: f64,
    dt: f64,
    t_end: f64,
) -> Result<AxialTrajectory, DynamicsError> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(DynamicsError::InvalidModel("dt and t_end must be positive"));
    }
    let known = model.ids();
    for id in wave.electrodes() {
        if !known.contains(&id) {
            return Err(DynamicsError::UnknownElectrode(id.to_string()));
        }
    }
    let qm = ion.charge / ion.mass;
    let n = (t_end / dt).round() as usize;
    let mut out = AxialTrajectory { t: Vec::with_capacity(n + 1), z: Vec::with_capacity(n + 1), v: Vec::with_capacity(n + 1) };
    let mut s = [z0, v0];
    out.t.push(0.0);
    out.z.push(z0);
    out.v.push(v0);
    for k in 0..n {
        let t = k as f64 * dt;
        s = rk4_step(|t, y: &[f64; 2]| [y[1], qm * model.field(wave, y[0], t) - gamma * y[1]], t, &s, dt);
        if !(s[0].is_finite() && s[1].is_finite()) {
            return Err(DynamicsError::NonFinite { t: t + dt });
        }
        out.t.push((k + 1) as f64 * dt);
        out.z.push(s[0]);
        out.v.push(s[1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{movement_waveform, shuttle_time, MovementKind, MovementSpec, ShuttleModel};

    #[test]
    fn kernel_is_trapezoid() {
        let m = AxialModel::uniform(3, 1e-3, 2e-4).unwrap();
        let w = Waveform::new(vec![crate::dynamics::Segment { electrode: "c1".into(), t_start: 0.0, t_end: 1.0, volts: 5.0 }]).unwrap();
        assert_eq!(m.potential(&w, 1e-3, 0.0), 5.0);
        assert!((m.potential(&w, 1e-3 + 4e-4 + 1e-4, 0.0) - 2.5).abs() < 1e-12);
        assert_eq!(m.potential(&w, 2e-3, 0.0), 0.0);
        assert!((m.field(&w, 1e-3 + 5e-4, 0.0) - 5.0 / 2e-4).abs() < 1e-6);
    }

    #[test]
    fn push_off_a_ramp_matches_transcendental_solution() {
        let ion = IonSpecies::microsphere();
        let (pitch, ramp) = (2e-3, 1e-3);
        let model = AxialModel::uniform(2, pitch, ramp).unwrap();
        let spec = MovementSpec {
            kind: MovementKind::Shuttle,
            control: vec!["c0".into()],
            destination_center: None,
            t_switch: 0.0,
            t_end: 1.0,
            corner_delay: 0.0,
        };
        let wave = movement_waveform(&spec, &model.ids()).unwrap();
        let gamma = 2000.0;
        // ion starts at rest where the ramp begins; field there is 5 V / 1 mm
        let z0 = 0.5 * (pitch - ramp) + 1e-12;
        let tr = simulate_axial(&model, &wave, &ion, gamma, z0, 0.0, 1e-7, 5e-3).unwrap();
        let (t, v) = tr.crossing(z0 + ramp).unwrap();
        let s = shuttle_time(&ShuttleModel::new(5.0 / ramp, ramp, gamma).unwrap(), &ion).unwrap();
        assert!((t / s.t_d - 1.0).abs() < 1e-4, "{t} vs {}", s.t_d);
        assert!((v / s.exit_velocity - 1.0).abs() < 1e-4);
    }
}
