//! Secular (ponderomotive) potential and the quantities read off it.

mod depth;
mod fit;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use depth::{trap_depth, EscapeDirection, TrapDepth, DEPTH_REL_TOL};
pub use fit::{secular_frequencies, SecularFrequencies, DEFAULT_FIT_WINDOW};

use crate::fieldsolver::{PotentialField, Voltages};
use crate::geometry::{IonSpecies, TrapLayout};
use crate::grid::{GridError, ScalarGrid};
use crate::units::{fmt_num, joules_to_ev};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseudoError {
    #[error("no trap: {0}")]
    NoTrap(&'static str),
    #[error("stationary point is a saddle (Hessian eigenvalues {0:e}, {1:e})")]
    SaddleNotMinimum(f64, f64),
    #[error("quadratic fit is ill-conditioned: {0}")]
    IllConditioned(&'static str),
    #[error("invalid drive: {0}")]
    BadDrive(&'static str),
    #[error("normalization undefined: {0}")]
    Undefined(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// RF drive and DC settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// RF amplitude V (volts).
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub v_rf: f64,
    /// Drive angular frequency Ω (rad/s).
    #[serde(deserialize_with = "crate::units::de::angular_frequency")]
    pub omega: f64,
    /// Top-plate bias U (volts).
    #[serde(default, deserialize_with = "crate::units::de::volts")]
    pub u_plate: f64,
    /// DC voltage per electrode id.
    #[serde(default, deserialize_with = "crate::units::de::volts_map")]
    pub dc: BTreeMap<String, f64>,
}

impl DriveConfig {
    pub fn new(v_rf: f64, omega: f64) -> Result<Self, PseudoError> {
        let d = Self { v_rf, omega, u_plate: 0.0, dc: BTreeMap::new() };
        d.validate()?;
        Ok(d)
    }

    pub fn with_plate(mut self, u: f64) -> Self {
        self.u_plate = u;
        self
    }

    pub fn with_dc(mut self, id: &str, volts: f64) -> Self {
        self.dc.insert(id.to_string(), volts);
        self
    }

    pub fn validate(&self) -> Result<(), PseudoError> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(PseudoError::BadDrive("Omega must be positive"));
        }
        if !(self.v_rf >= 0.0) || !self.v_rf.is_finite() {
            return Err(PseudoError::BadDrive("V must be nonnegative"));
        }
        Ok(())
    }

    pub fn voltages(&self) -> Voltages {
        Voltages { rf_amplitude: self.v_rf, dc: self.dc.clone(), top_plate: self.u_plate }
    }
}

/// `ψ = Q²/(4mΩ²)·|∇φ_RF|² + Q·φ_DC` at every node (J).
pub fn secular_potential(field: &PotentialField, ion: &IonSpecies, omega: f64) -> Result<ScalarGrid, PseudoError> {
    if !(omega > 0.0) {
        return Err(PseudoError::BadDrive("Omega must be positive"));
    }
    let s = field.grid();
    if field.phi_dc.spec != s {
        return Err(GridError::ShapeMismatch.into());
    }
    let k = ion.charge * ion.charge / (4.0 * ion.mass * omega * omega);
    let mut psi = ScalarGrid::zeros(s);
    for j in 0..s.rows() {
        for i in 0..s.cols() {
            let [gx, gy] = field.phi_rf.node_gradient(i, j);
            psi.values[s.idx(i, j)] = k * (gx * gx + gy * gy) + ion.charge * field.phi_dc.at(i, j);
        }
    }
    Ok(psi)
}

/// Rectangle searched for the trapping minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SearchWindow {
    /// Region above the centre and RF strips, up to 4·r1 high.
    pub fn above_trap(layout: &TrapLayout) -> Self {
        let half = match layout.dims() {
            Some(d) => 0.5 * d.w_c + d.g + d.w_r,
            None => layout.domain().x_max,
        };
        let r1 = layout.r1().unwrap_or(layout.domain().y_max);
        Self { x_min: -half, x_max: half, y_min: 0.0, y_max: (4.0 * r1).min(layout.domain().y_max) }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimum {
    pub x: f64,
    pub y: f64,
    /// Refined ψ at (x, y) (J).
    pub value: f64,
    /// Grid node of the discrete minimum.
    pub node: (usize, usize),
}

impl Minimum {
    /// Height above the electrode plane.
    pub fn r0(&self) -> f64 {
        self.y
    }
}

/// Lowest strict interior local minimum of ψ, refined by a quadratic through its 3×3 neighbourhood.
pub fn find_minimum(psi: &ScalarGrid, window: Option<SearchWindow>) -> Result<Minimum, PseudoError> {
    let s = psi.spec;
    let mut best: Option<(usize, usize)> = None;
    for j in 1..s.rows() - 1 {
        for i in 1..s.cols() - 1 {
            if let Some(w) = window {
                if !w.contains(s.x(i), s.y(j)) {
                    continue;
                }
            }
            let v = psi.at(i, j);
            let is_local = (-1i64..=1).all(|dj| {
                (-1i64..=1).all(|di| {
                    (di == 0 && dj == 0)
                        || v < psi.at((i as i64 + di) as usize, (j as i64 + dj) as usize)
                })
            });
            if is_local && best.is_none_or(|(bi, bj)| v < psi.at(bi, bj)) {
                best = Some((i, j));
            }
        }
    }
    let (i, j) = best.ok_or(PseudoError::NoTrap("no interior local minimum"))?;
    let (dx, dy, dv) = refine(psi, i, j);
    Ok(Minimum {
        x: s.x(i) + dx * s.spacing,
        y: s.y(j) + dy * s.spacing,
        value: psi.at(i, j) + dv,
        node: (i, j),
    })
}

// Offset (cells) and value change of the stationary point of the local quadratic.
fn refine(psi: &ScalarGrid, i: usize, j: usize) -> (f64, f64, f64) {
    let p = |di: i64, dj: i64| psi.at((i as i64 + di) as usize, (j as i64 + dj) as usize);
    let c = p(0, 0);
    let gx = 0.5 * (p(1, 0) - p(-1, 0));
    let gy = 0.5 * (p(0, 1) - p(0, -1));
    let hxx = p(1, 0) - 2.0 * c + p(-1, 0);
    let hyy = p(0, 1) - 2.0 * c + p(0, -1);
    let hxy = 0.25 * (p(1, 1) - p(1, -1) - p(-1, 1) + p(-1, -1));
    let det = hxx * hyy - hxy * hxy;
    if !(det > 0.0) || !(hxx > 0.0) {
        return (0.0, 0.0, 0.0);
    }
    let dx = -(hyy * gx - hxy * gy) / det;
    let dy = -(hxx * gy - hxy * gx) / det;
    if dx.abs() > 1.0 || dy.abs() > 1.0 {
        return (0.0, 0.0, 0.0);
    }
    (dx, dy, 0.5 * (gx * dx + gy * dy))
}

/// Length used to normalise depth and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value")]
pub enum NormScale {
    R0(f64),
    R1(f64),
}

impl NormScale {
    pub fn length(self) -> f64 {
        match self {
            NormScale::R0(r) | NormScale::R1(r) => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalized {
    pub d: f64,
    pub f: [f64; 2],
    pub u: Option<f64>,
}

/// Dimensionless depth and frequencies; `plate = Some((h, r1))` also yields `u`.
pub fn normalize(
    depth: f64,
    omega: [f64; 2],
    ion: &IonSpecies,
    drive: &DriveConfig,
    scale: NormScale,
    plate: Option<(f64, f64)>,
) -> Result<Normalized, PseudoError> {
    let r = scale.length();
    if !(r > 0.0) {
        return Err(PseudoError::Undefined("length scale must be positive"));
    }
    if drive.v_rf == 0.0 {
        return Err(PseudoError::Undefined("RF amplitude is zero"));
    }
    let (q, m, v, w) = (ion.charge, ion.mass, drive.v_rf, drive.omega);
    let d = depth * 4.0 * m * w * w * r * r / (q * q * v * v);
    let fk = std::f64::consts::SQRT_2 * m * r * r * w / (q * v);
    let u = plate.map(|(h, r1)| normalized_plate_bias(drive.u_plate, h, r1, ion, drive)).transpose()?;
    Ok(Normalized { d, f: [omega[0] * fk, omega[1] * fk], u })
}

/// `u = (4·m·r1²·Ω²/(Q·V²))·(r1/h)·U`
pub fn normalized_plate_bias(
    u_plate: f64,
    h: f64,
    r1: f64,
    ion: &IonSpecies,
    drive: &DriveConfig,
) -> Result<f64, PseudoError> {
    if drive.v_rf == 0.0 {
        return Err(PseudoError::Undefined("RF amplitude is zero"));
    }
    if !(h > 0.0 && r1 > 0.0) {
        return Err(PseudoError::Undefined("plate height and r1 must be positive"));
    }
    let w = drive.omega;
    Ok(4.0 * ion.mass * r1 * r1 * w * w / (ion.charge * drive.v_rf * drive.v_rf) * (r1 / h) * u_plate)
}

/// Inverse of [`normalized_plate_bias`]: plate volts for a given `u`.
pub fn plate_bias_for(u: f64, h: f64, r1: f64, ion: &IonSpecies, drive: &DriveConfig) -> Result<f64, PseudoError> {
    let one = normalized_plate_bias(1.0, h, r1, ion, drive)?;
    Ok(u / one)
}

/// Tunables for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Fit radius as a fraction of r0.
    pub fit_window: f64,
    pub depth_rel_tol: f64,
    pub window: Option<SearchWindow>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { fit_window: DEFAULT_FIT_WINDOW, depth_rel_tol: DEPTH_REL_TOL, window: None }
    }
}

impl AnalysisOptions {
    pub fn for_layout(layout: &TrapLayout) -> Self {
        Self { window: Some(SearchWindow::above_trap(layout)), ..Self::default() }
    }
}

/// ψ with its minimum, depth and harmonic frequencies.
#[derive(Debug, Clone)]
pub struct SecularMap {
    pub psi: ScalarGrid,
    pub minimum: Minimum,
    pub r0: f64,
    pub depth: TrapDepth,
    pub omega: SecularFrequencies,
}

pub fn analyze(
    field: &PotentialField,
    ion: &IonSpecies,
    drive: &DriveConfig,
    opts: &AnalysisOptions,
) -> Result<SecularMap, PseudoError> {
    drive.validate()?;
    let psi = secular_potential(field, ion, drive.omega)?;
    let minimum = find_minimum(&psi, opts.window)?;
    let depth = trap_depth(&psi, &minimum, opts.depth_rel_tol)?;
    let omega = secular_frequencies(&psi, &minimum, ion, opts.fit_window)?;
    Ok(SecularMap { r0: minimum.r0(), psi, minimum, depth, omega })
}

/// One line of per-configuration output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub x0: f64,
    pub r0: f64,
    pub depth_ev: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub d: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub u: Option<f64>,
    pub escape: EscapeDirection,
    pub open_basin: bool,
}

impl Summary {
    pub fn new(map: &SecularMap, norm: &Normalized) -> Self {
        Self {
            x0: map.minimum.x,
            r0: map.r0,
            depth_ev: joules_to_ev(map.depth.depth),
            omega_x: map.omega.omega_x,
            omega_y: map.omega.omega_y,
            d: norm.d,
            f_x: norm.f[0],
            f_y: norm.f[1],
            u: norm.u,
            escape: map.depth.escape,
            open_basin: map.depth.open_basin,
        }
    }
}

/// `x,y,psi_J` rows preceded by `# key: value` metadata lines.
pub fn write_psi_csv<W: Write>(mut w: W, psi: &ScalarGrid, meta: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "x_m,y_m,psi_J")?;
    let s = psi.spec;
    for j in 0..s.rows() {
        for i in 0..s.cols() {
            writeln!(w, "{},{},{}", fmt_num(s.x(i)), fmt_num(s.y(j)), fmt_num(psi.at(i, j)))?;
        }
    }
    Ok(())
}
