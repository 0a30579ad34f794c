//! End-to-end worked example: Sr⁺ trap with r0 ≈ 500 μm, with and without a top plate.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dynamics::{
    integrate_trajectory, micromotion_analytic, micromotion_from_trajectory, RunConfig, TrapFields, Waveform,
};
use crate::fieldsolver::{compose, solve_basis, BasisSet, DEFAULT_TOL};
use crate::geometry::{five_electrode_layout, FiveElectrodeDims, IonSpecies, TrapLayout, DEFAULT_OUTER_WIDTH_R1};
use crate::grid::GridSpec;
use crate::pseudopotential::{
    analyze, find_minimum, normalize, secular_potential, AnalysisOptions, DriveConfig, EscapeDirection, NormScale,
    SecularMap,
};
use crate::units::{joules_to_ev, rad_to_hz};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(deserialize_with = "crate::units::de::length")]
    pub w_c: f64,
    #[serde(deserialize_with = "crate::units::de::length")]
    pub w_r: f64,
    #[serde(deserialize_with = "crate::units::de::length")]
    pub g: f64,
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub v_rf: f64,
    #[serde(deserialize_with = "crate::units::de::angular_frequency")]
    pub omega: f64,
    pub ion: IonSpecies,
    /// Plate height and bias for the second case.
    #[serde(deserialize_with = "crate::units::de::length")]
    pub h: f64,
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub u_plate: f64,
    pub tol: f64,
    pub steps_per_period: usize,
    pub periods: usize,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            w_c: 290e-6,
            w_r: 500e-6,
            g: 250e-6,
            v_rf: 500.0,
            omega: TAU * 1e7,
            ion: IonSpecies::sr88_plus(),
            h: 1e-2,
            u_plate: 100.0,
            tol: DEFAULT_TOL,
            steps_per_period: 200,
            periods: 40,
        }
    }
}

impl DesignSpec {
    fn dims(&self) -> FiveElectrodeDims {
        let r1 = 0.5 * (self.w_c + self.w_r) + self.g;
        FiveElectrodeDims { w_c: self.w_c, w_r: self.w_r, w_o: DEFAULT_OUTER_WIDTH_R1 * r1, g: self.g, g_prime: self.g }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoPlateReport {
    pub x0: f64,
    pub r0: f64,
    pub depth_ev: f64,
    pub d0: f64,
    pub f_x: f64,
    pub f_y: f64,
    /// ω/2π (Hz).
    pub freq_x_hz: f64,
    pub freq_y_hz: f64,
    pub escape: EscapeDirection,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateReport {
    pub h: f64,
    pub u_plate: f64,
    /// Normalized bias u.
    pub u: f64,
    pub depth_ev: f64,
    pub d1: f64,
    pub escape: EscapeDirection,
    /// Height of the secular minimum with the plate biased.
    pub y_min: f64,
    /// Height of the RF null in the same layout.
    pub y_rf_null: f64,
    pub dy: f64,
    /// `2√2·ω_y/Ω` from the unbiased trap.
    pub q: f64,
    pub micromotion_analytic: f64,
    pub micromotion_trajectory: f64,
    pub trajectory_periods: usize,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub spec: DesignSpec,
    pub no_plate: NoPlateReport,
    pub with_plate: PlateReport,
}

fn secular_map(layout: &TrapLayout, basis: &BasisSet, ion: &IonSpecies, drive: &DriveConfig) -> Result<SecularMap, AnalysisError> {
    let field = compose(basis, &drive.voltages())?;
    Ok(analyze(&field, ion, drive, &AnalysisOptions::for_layout(layout))?)
}

pub fn design_example(spec: &DesignSpec) -> Result<DesignReport, AnalysisError> {
    let ion = &spec.ion;
    let drive = DriveConfig::new(spec.v_rf, spec.omega)?;

    let open = five_electrode_layout(spec.dims(), None)?;
    let grid0 = GridSpec::default_for(&open)?;
    let basis0 = solve_basis(&open, grid0, spec.tol)?;
    let m0 = secular_map(&open, &basis0, ion, &drive)?;
    let n0 = normalize(m0.depth.depth, m0.omega.as_array(), ion, &drive, NormScale::R0(m0.r0), None)?;
    let no_plate = NoPlateReport {
        x0: m0.minimum.x,
        r0: m0.r0,
        depth_ev: joules_to_ev(m0.depth.depth),
        d0: n0.d,
        f_x: n0.f[0],
        f_y: n0.f[1],
        freq_x_hz: rad_to_hz(m0.omega.omega_x),
        freq_y_hz: rad_to_hz(m0.omega.omega_y),
        escape: m0.depth.escape,
        grid: grid0,
    };

    let plated = five_electrode_layout(spec.dims(), Some(spec.h))?;
    let grid1 = GridSpec::default_for(&plated)?;
    let basis1 = solve_basis(&plated, grid1, spec.tol)?;
    let drive1 = drive.clone().with_plate(spec.u_plate);
    let m1 = secular_map(&plated, &basis1, ion, &drive1)?;
    let r1 = spec.dims().r1();
    let n1 = normalize(m1.depth.depth, m1.omega.as_array(), ion, &drive1, NormScale::R1(r1), Some((spec.h, r1)))?;

    // RF null: minimum of the pure pseudopotential in the plated layout
    let rf_only = compose(&basis1, &drive.voltages())?;
    let null = find_minimum(&secular_potential(&rf_only, ion, spec.omega)?, Some(AnalysisOptions::for_layout(&plated).window.unwrap()))?;
    let dy = null.y - m1.minimum.y;
    let q = 2.0 * SQRT_2 * m0.omega.omega_y / spec.omega;

    // start on the micromotion orbit at the phase cos Ωt = 1 so the secular motion stays small
    let fields = TrapFields::new(&basis1);
    let (x, y) = (m1.minimum.x, m1.minimum.y);
    let g = fields.rf.at(x, y)?;
    let k = ion.charge * spec.v_rf / (ion.mass * spec.omega * spec.omega);
    let init = [x + k * g[0], y + k * g[1], 0.0, 0.0];
    let run = RunConfig::per_period(spec.omega, spec.steps_per_period, spec.periods);
    let traj = integrate_trajectory(&fields, &Waveform::new(vec![])?, &drive1, ion, None, init, run)?;
    if traj.escaped {
        return Err(AnalysisError::Invalid("ion left the trap during the micromotion run".into()));
    }
    let with_plate = PlateReport {
        h: spec.h,
        u_plate: spec.u_plate,
        u: n1.u.unwrap_or(f64::NAN),
        depth_ev: joules_to_ev(m1.depth.depth),
        d1: n1.d,
        escape: m1.depth.escape,
        y_min: m1.minimum.y,
        y_rf_null: null.y,
        dy,
        q,
        micromotion_analytic: micromotion_analytic(q, dy),
        micromotion_trajectory: micromotion_from_trajectory(&traj, spec.omega, 0.0)?,
        trajectory_periods: spec.periods,
        grid: grid1,
    };
    Ok(DesignReport { spec: spec.clone(), no_plate, with_plate })
}
