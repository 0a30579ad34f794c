//! Normalized depth and frequency maps over electrode-width ratios and top-plate bias.
//!
//! Lattice points are independent; they run on the current rayon pool and are
//! collected in lattice order, so the result does not depend on the thread count.

use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::fieldsolver::{solve_combination, PotentialField, DEFAULT_TOL};
use crate::geometry::{
    five_electrode_layout_sized, DomainSize, FiveElectrodeDims, IonSpecies, TrapLayout, RF_LEFT, RF_RIGHT, TOP_PLATE,
};
use crate::grid::{GridSpec, ScalarGrid, CELLS_PER_GAP};
use crate::pseudopotential::{
    analyze, normalize, plate_bias_for, AnalysisOptions, DriveConfig, EscapeDirection, NormScale, PseudoError,
    SecularMap,
};
use crate::units::{fmt_num, joules_to_ev};

/// Upper bound on the sweep grid spacing, in cells per target r0.
pub const SWEEP_CELLS_PER_R0: f64 = 24.0;
/// Lower bound on the sweep grid spacing, in cells per r1; keeps narrow-gap corners affordable.
pub const SWEEP_MAX_CELLS_PER_R1: f64 = 48.0;
/// Convergence of the ion height onto the target r0.
pub const R0_REL_TOL: f64 = 0.005;
pub const MAX_R0_ITERATIONS: usize = 12;
/// Gap range searched when placing the ion at r0, in units of r0.
pub const G_R0_RANGE: (f64, f64) = (0.02, 4.0);
/// Solve box for sweeps. Side clearance barely moves d0; the lid height does, so it stays at 20·r1.
pub const SWEEP_DOMAIN: DomainSize = DomainSize { margin_r1: 4.0, lid_r1: 20.0 };
pub const SWEEP_OUTER_WIDTH_R1: f64 = 4.0;
/// Resolution to which top-plate escape transitions and the depth peak are located in u.
pub const U_REFINE_TOL: f64 = 1e-3;

/// Evenly spaced values `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self, AnalysisError> {
        let r = Self { min, max, points };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.points == 0 || !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(AnalysisError::Invalid(format!(
                "range [{}, {}] with {} points is empty or unordered",
                self.min, self.max, self.points
            )));
        }
        if self.points == 1 && self.min != self.max {
            return Err(AnalysisError::Invalid("a one-point range needs min == max".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.min + k as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// No positive gap puts the ion at the target height.
    NoGeometry,
    NoTrap,
    NotConverged,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::NoGeometry => "no_geometry",
            PointStatus::NoTrap => "no_trap",
            PointStatus::NotConverged => "not_converged",
            PointStatus::Failed => "failed",
        }
    }
}

fn status_of(e: &AnalysisError) -> PointStatus {
    match e {
        AnalysisError::Pseudo(PseudoError::NoTrap(_) | PseudoError::SaddleNotMinimum(..)) => PointStatus::NoTrap,
        _ => PointStatus::Failed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySweepSpec {
    pub wc_r0: AxisRange,
    pub log10_wr_r0: AxisRange,
    /// Physical ion height the lattice is built at; normalized results do not depend on it.
    #[serde(deserialize_with = "crate::units::de::length")]
    pub r0_target: f64,
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub v_rf: f64,
    #[serde(deserialize_with = "crate::units::de::angular_frequency")]
    pub omega: f64,
    pub ion: IonSpecies,
    pub tol: f64,
    pub cells_per_r0: f64,
}

impl Default for GeometrySweepSpec {
    fn default() -> Self {
        Self {
            wc_r0: AxisRange { min: 0.1, max: 1.3, points: 25 },
            log10_wr_r0: AxisRange { min: -0.5, max: 0.8, points: 25 },
            r0_target: 500e-6,
            v_rf: 500.0,
            omega: TAU * 1e7,
            ion: IonSpecies::sr88_plus(),
            tol: DEFAULT_TOL,
            cells_per_r0: SWEEP_CELLS_PER_R0,
        }
    }
}

impl GeometrySweepSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        self.wc_r0.validate()?;
        self.log10_wr_r0.validate()?;
        if !(self.wc_r0.min > 0.0) {
            return Err(AnalysisError::Invalid("w_c/r0 must be positive".into()));
        }
        for (name, x) in [("r0_target", self.r0_target), ("tol", self.tol), ("cells_per_r0", self.cells_per_r0)] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(AnalysisError::Invalid(format!("{name} must be positive, got {x}")));
            }
        }
        self.drive()?;
        Ok(())
    }

    fn drive(&self) -> Result<DriveConfig, AnalysisError> {
        Ok(DriveConfig::new(self.v_rf, self.omega)?)
    }
}

/// One lattice point. Numeric fields are NaN when `status` is not `Ok`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryPoint {
    pub wc_r0: f64,
    pub wr_r0: f64,
    pub status: PointStatus,
    pub message: Option<String>,
    /// Gap over achieved ion height.
    pub g_r0: f64,
    /// Achieved ion height (m).
    pub r0: f64,
    pub d0: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub depth_ev: f64,
    pub escape: Option<EscapeDirection>,
    pub iterations: usize,
}

impl GeometryPoint {
    fn failed(wc_r0: f64, wr_r0: f64, status: PointStatus, message: String, iterations: usize) -> Self {
        Self {
            wc_r0,
            wr_r0,
            status,
            message: Some(message),
            g_r0: f64::NAN,
            r0: f64::NAN,
            d0: f64::NAN,
            f_x: f64::NAN,
            f_y: f64::NAN,
            depth_ev: f64::NAN,
            escape: None,
            iterations,
        }
    }
}

/// Same lattice point evaluated at two physical scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleCheck {
    pub wc_r0: f64,
    pub wr_r0: f64,
    pub scales: [f64; 2],
    pub d0: [f64; 2],
    pub f_x: [f64; 2],
    pub f_y: [f64; 2],
    /// Largest relative difference among d0, f_x, f_y.
    pub max_rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySweep {
    pub spec: GeometrySweepSpec,
    /// `w_c/r0` varies slowest.
    pub points: Vec<GeometryPoint>,
    pub scale_check: Option<ScaleCheck>,
}

/// Normalized results for one concrete layout with only the RF strips driven.
#[derive(Debug, Clone)]
struct Eval {
    r0: f64,
    d0: f64,
    f: [f64; 2],
    depth: f64,
    escape: EscapeDirection,
}

fn sweep_dims(w_c: f64, w_r: f64, g: f64) -> FiveElectrodeDims {
    let r1 = 0.5 * (w_c + w_r) + g;
    FiveElectrodeDims { w_c, w_r, w_o: SWEEP_OUTER_WIDTH_R1 * r1, g, g_prime: g }
}

fn rf_map(layout: &TrapLayout, grid: GridSpec, spec_tol: f64, ion: &IonSpecies, drive: &DriveConfig) -> Result<SecularMap, AnalysisError> {
    let v = drive.v_rf;
    let phi_rf = solve_combination(layout, grid, spec_tol, &[(RF_LEFT, v), (RF_RIGHT, v)])?;
    let field = PotentialField { phi_dc: ScalarGrid::zeros(grid), phi_rf };
    Ok(analyze(&field, ion, drive, &AnalysisOptions::for_layout(layout))?)
}

fn eval_geometry(spec: &GeometrySweepSpec, w_c: f64, w_r: f64, g: f64, scale: f64) -> Result<Eval, AnalysisError> {
    let dims = sweep_dims(w_c, w_r, g);
    let layout = five_electrode_layout_sized(dims, None, SWEEP_DOMAIN)?;
    let spacing = (scale / spec.cells_per_r0).min((g / CELLS_PER_GAP).max(dims.r1() / SWEEP_MAX_CELLS_PER_R1));
    let grid = GridSpec::covering(&layout, spacing)?;
    let drive = spec.drive()?;
    let map = rf_map(&layout, grid, spec.tol, &spec.ion, &drive)?;
    let n = normalize(map.depth.depth, map.omega.as_array(), &spec.ion, &drive, NormScale::R0(map.r0), None)?;
    Ok(Eval { r0: map.r0, d0: n.d, f: n.f, depth: map.depth.depth, escape: map.depth.escape })
}

/// Gap over r0 that puts the ion at r0 for gapless-strip estimates with the gaps split between neighbours.
///
/// Solves `(A + G)(A + 2B + 3G) = 4`; non-positive when no gap works.
pub fn gap_estimate(wc_r0: f64, wr_r0: f64) -> f64 {
    let (a, b) = (wc_r0, wr_r0);
    let p = 4.0 * a + 2.0 * b;
    let c = a * (a + 2.0 * b) - 4.0;
    (-p + (p * p - 12.0 * c).sqrt()) / 6.0
}

/// Find the gap that puts the ion at `scale` for fixed `w_c/r0`, `w_r/r0`.
fn place_ion(spec: &GeometrySweepSpec, a: f64, b: f64, scale: f64) -> Result<(f64, Eval, usize), (PointStatus, String, usize)> {
    let (g_min, g_max) = G_R0_RANGE;
    let (w_c, w_r) = (a * scale, b * scale);
    let eval = |gr: f64| eval_geometry(spec, w_c, w_r, gr * scale, scale);
    let mut g = gap_estimate(a, b).clamp(g_min, g_max);
    // bracket on the residual r0/scale − 1, which grows with the gap
    let (mut lo, mut hi): (Option<(f64, f64)>, Option<(f64, f64)>) = (None, None);
    let mut prev: Option<(f64, f64)> = None;
    for it in 1..=MAX_R0_ITERATIONS {
        let e = eval(g).map_err(|e| (status_of(&e), e.to_string(), it))?;
        let res = e.r0 / scale - 1.0;
        if res.abs() < R0_REL_TOL {
            return Ok((g, e, it));
        }
        if res < 0.0 {
            lo = Some((g, res));
        } else {
            hi = Some((g, res));
        }
        if res > 0.0 && g <= g_min {
            return Err((PointStatus::NoGeometry, format!("ion above target even at g/r0 = {g_min}"), it));
        }
        if res < 0.0 && g >= g_max {
            return Err((PointStatus::NoGeometry, format!("ion below target even at g/r0 = {g_max}"), it));
        }
        let mut next = match prev {
            Some((gp, rp)) if rp != res => g - res * (g - gp) / (res - rp),
            // r0 grows roughly one-for-one with the gap
            _ => g - res,
        };
        if let (Some((gl, _)), Some((gh, _))) = (lo, hi) {
            if !(next > gl.min(gh) && next < gl.max(gh)) {
                next = 0.5 * (gl + gh);
            }
        }
        prev = Some((g, res));
        g = next.clamp(g_min, g_max);
    }
    Err((PointStatus::NotConverged, format!("r0 not within {R0_REL_TOL} after {MAX_R0_ITERATIONS} solves"), MAX_R0_ITERATIONS))
}

fn geometry_point(spec: &GeometrySweepSpec, a: f64, b: f64) -> GeometryPoint {
    match place_ion(spec, a, b, spec.r0_target) {
        Ok((g, e, it)) => GeometryPoint {
            wc_r0: a,
            wr_r0: b,
            status: PointStatus::Ok,
            message: None,
            g_r0: g * spec.r0_target / e.r0,
            r0: e.r0,
            d0: e.d0,
            f_x: e.f[0],
            f_y: e.f[1],
            depth_ev: joules_to_ev(e.depth),
            escape: Some(e.escape),
            iterations: it,
        },
        Err((status, msg, it)) => GeometryPoint::failed(a, b, status, msg, it),
    }
}

/// Depth and frequency maps over `w_c/r0` and `log10(w_r/r0)`.
pub fn sweep_geometry(spec: &GeometrySweepSpec) -> Result<GeometrySweep, AnalysisError> {
    spec.validate()?;
    let lattice: Vec<(f64, f64)> = spec
        .wc_r0
        .values()
        .into_iter()
        .flat_map(|a| spec.log10_wr_r0.values().into_iter().map(move |lb| (a, 10f64.powf(lb))))
        .collect();
    let points: Vec<GeometryPoint> = lattice.par_iter().map(|&(a, b)| geometry_point(spec, a, b)).collect();
    let scale_check = points.iter().find(|p| p.status == PointStatus::Ok).map(|p| scale_check(spec, p));
    Ok(GeometrySweep { spec: spec.clone(), points, scale_check: scale_check.transpose()? })
}

// Rebuild a solved point at ten times the physical size with the same gap ratio.
fn scale_check(spec: &GeometrySweepSpec, p: &GeometryPoint) -> Result<ScaleCheck, AnalysisError> {
    let s0 = spec.r0_target;
    let s1 = 10.0 * s0;
    let g0 = p.g_r0 * p.r0;
    let e0 = eval_geometry(spec, p.wc_r0 * s0, p.wr_r0 * s0, g0, s0)?;
    let e1 = eval_geometry(spec, p.wc_r0 * s1, p.wr_r0 * s1, 10.0 * g0, s1)?;
    let rel = |x: f64, y: f64| ((x - y) / x).abs();
    let max_rel_diff = rel(e0.d0, e1.d0).max(rel(e0.f[0], e1.f[0])).max(rel(e0.f[1], e1.f[1]));
    Ok(ScaleCheck {
        wc_r0: p.wc_r0,
        wr_r0: p.wr_r0,
        scales: [s0, s1],
        d0: [e0.d0, e1.d0],
        f_x: [e0.f[0], e1.f[0]],
        f_y: [e0.f[1], e1.f[1]],
        max_rel_diff,
    })
}

fn meta_lines<W: Write>(w: &mut W, meta: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

fn opt_escape(e: Option<EscapeDirection>) -> String {
    e.map_or_else(|| "NONE".to_string(), |e| e.to_string())
}

pub fn write_geometry_csv<W: Write>(mut w: W, sweep: &GeometrySweep, meta: &[(&str, String)]) -> std::io::Result<()> {
    meta_lines(&mut w, meta)?;
    writeln!(w, "wc_r0,wr_r0,log10_wr_r0,g_r0,r0_m,d0,f_x,f_y,depth_eV,escape,status,iterations")?;
    for p in &sweep.points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_num(p.wc_r0),
            fmt_num(p.wr_r0),
            fmt_num(p.wr_r0.log10()),
            fmt_num(p.g_r0),
            fmt_num(p.r0),
            fmt_num(p.d0),
            fmt_num(p.f_x),
            fmt_num(p.f_y),
            fmt_num(p.depth_ev),
            opt_escape(p.escape),
            p.status.as_str(),
            p.iterations
        )?;
    }
    Ok(())
}

/// Heat maps of d0 and f with dashed contours of constant g/r0.
pub fn geometry_gnuplot(csv: &str, cols: usize, rows: usize) -> String {
    format!(
        r#"set datafile separator ","
set datafile missing "NaN"
set xlabel "log10(w_r/r_0)"
set ylabel "w_c/r_0"
set view map
set dgrid3d {rows},{cols}
set contour base
set cntrparam levels 8
set terminal pngcairo size 900,700
set output "d0.png"
set title "d_0"
splot "{csv}" using 3:1:6 with pm3d notitle, \
      "{csv}" using 3:1:4 with lines dt 2 lc rgb "white" nosurface title "g/r_0"
set output "f.png"
set title "f"
splot "{csv}" using 3:1:8 with pm3d notitle, \
      "{csv}" using 3:1:4 with lines dt 2 lc rgb "white" nosurface title "g/r_0"
"#
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopPlateSweepSpec {
    pub wc_r1: f64,
    pub wr_r1: f64,
    pub h_r1: Vec<f64>,
    pub u: AxisRange,
    /// Physical r1 the layouts are built at.
    #[serde(deserialize_with = "crate::units::de::length")]
    pub r1: f64,
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub v_rf: f64,
    #[serde(deserialize_with = "crate::units::de::angular_frequency")]
    pub omega: f64,
    pub ion: IonSpecies,
    pub tol: f64,
    /// Locate escape transitions and the depth peak by bisection in u.
    pub refine: bool,
}

impl Default for TopPlateSweepSpec {
    fn default() -> Self {
        Self {
            wc_r1: 0.6,
            wr_r1: 0.6,
            h_r1: vec![10.0, 20.0, 40.0],
            u: AxisRange { min: 0.0, max: 2.0, points: 41 },
            r1: 1e-3,
            v_rf: 500.0,
            omega: TAU * 1e7,
            ion: IonSpecies::sr88_plus(),
            tol: DEFAULT_TOL,
            refine: true,
        }
    }
}

impl TopPlateSweepSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        self.u.validate()?;
        let g = 1.0 - 0.5 * (self.wc_r1 + self.wr_r1);
        if !(self.wc_r1 > 0.0 && self.wr_r1 > 0.0 && g > 0.0) {
            return Err(AnalysisError::Invalid("need w_c, w_r > 0 and (w_c + w_r)/2 < r1".into()));
        }
        if self.h_r1.is_empty() || self.h_r1.iter().any(|h| !(*h > 1.0)) {
            return Err(AnalysisError::Invalid("h/r1 values must exceed 1".into()));
        }
        if !(self.r1 > 0.0 && self.tol > 0.0) {
            return Err(AnalysisError::Invalid("r1 and tol must be positive".into()));
        }
        DriveConfig::new(self.v_rf, self.omega)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopPlatePoint {
    pub u: f64,
    /// Plate bias (V).
    pub u_plate: f64,
    pub status: PointStatus,
    pub message: Option<String>,
    pub d1: f64,
    /// Frequencies normalized with r1 in place of r0.
    pub f1_x: f64,
    pub f1_y: f64,
    pub r0_r1: f64,
    pub depth_ev: f64,
    pub escape: Option<EscapeDirection>,
}

/// Change of escape direction between two neighbouring u values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: EscapeDirection,
    pub to: EscapeDirection,
    /// Best estimate of the switching u.
    pub u: f64,
    pub u_lo: f64,
    pub u_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub u: f64,
    pub d1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopPlateCurve {
    pub h_r1: f64,
    pub points: Vec<TopPlatePoint>,
    pub transitions: Vec<Transition>,
    pub peak: Option<Peak>,
    /// Peak d1 over d1 at u = 0, when the range starts at zero.
    pub enhancement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopPlateSweep {
    pub spec: TopPlateSweepSpec,
    pub curves: Vec<TopPlateCurve>,
}

/// RF and plate solutions for one plate height; every u reuses them.
struct PlateFields {
    layout: TrapLayout,
    phi_rf: ScalarGrid,
    phi_plate: ScalarGrid,
}

impl PlateFields {
    fn new(spec: &TopPlateSweepSpec, h_r1: f64) -> Result<Self, AnalysisError> {
        let r1 = spec.r1;
        let g = r1 - 0.5 * (spec.wc_r1 + spec.wr_r1) * r1;
        let dims = FiveElectrodeDims {
            w_c: spec.wc_r1 * r1,
            w_r: spec.wr_r1 * r1,
            w_o: crate::geometry::DEFAULT_OUTER_WIDTH_R1 * r1,
            g,
            g_prime: g,
        };
        let layout = five_electrode_layout_sized(dims, Some(h_r1 * r1), DomainSize::default())?;
        let grid = GridSpec::default_for(&layout)?;
        let phi_rf = solve_combination(&layout, grid, spec.tol, &[(RF_LEFT, 1.0), (RF_RIGHT, 1.0)])?;
        let phi_plate = solve_combination(&layout, grid, spec.tol, &[(TOP_PLATE, 1.0)])?;
        Ok(Self { layout, phi_rf, phi_plate })
    }

    fn point(&self, spec: &TopPlateSweepSpec, h_r1: f64, u: f64) -> TopPlatePoint {
        let mut p = TopPlatePoint {
            u,
            u_plate: f64::NAN,
            status: PointStatus::Ok,
            message: None,
            d1: f64::NAN,
            f1_x: f64::NAN,
            f1_y: f64::NAN,
            r0_r1: f64::NAN,
            depth_ev: f64::NAN,
            escape: None,
        };
        match self.eval(spec, h_r1, u) {
            Ok((u_plate, map, d1, f1)) => {
                p.u_plate = u_plate;
                p.d1 = d1;
                p.f1_x = f1[0];
                p.f1_y = f1[1];
                p.r0_r1 = map.r0 / spec.r1;
                p.depth_ev = joules_to_ev(map.depth.depth);
                p.escape = Some(map.depth.escape);
            }
            Err(e) => {
                p.status = status_of(&e);
                p.message = Some(e.to_string());
            }
        }
        p
    }

    fn eval(&self, spec: &TopPlateSweepSpec, h_r1: f64, u: f64) -> Result<(f64, SecularMap, f64, [f64; 2]), AnalysisError> {
        let drive0 = DriveConfig::new(spec.v_rf, spec.omega)?;
        let u_plate = plate_bias_for(u, h_r1 * spec.r1, spec.r1, &spec.ion, &drive0)?;
        let drive = drive0.with_plate(u_plate);
        let mut phi_rf = self.phi_rf.clone();
        phi_rf.values.iter_mut().for_each(|v| *v *= spec.v_rf);
        let mut phi_dc = self.phi_plate.clone();
        phi_dc.values.iter_mut().for_each(|v| *v *= u_plate);
        let field = PotentialField { phi_rf, phi_dc };
        let map = analyze(&field, &spec.ion, &drive, &AnalysisOptions::for_layout(&self.layout))?;
        let n = normalize(map.depth.depth, map.omega.as_array(), &spec.ion, &drive, NormScale::R1(spec.r1), None)?;
        Ok((u_plate, map, n.d, n.f))
    }
}

fn curve(spec: &TopPlateSweepSpec, h_r1: f64) -> Result<TopPlateCurve, AnalysisError> {
    let fields = PlateFields::new(spec, h_r1)?;
    let points: Vec<TopPlatePoint> = spec.u.values().par_iter().map(|&u| fields.point(spec, h_r1, u)).collect();

    let mut transitions = Vec::new();
    for w in points.windows(2) {
        if let (Some(a), Some(b)) = (w[0].escape, w[1].escape) {
            if a != b {
                let (mut lo, mut hi) = (w[0].u, w[1].u);
                if spec.refine {
                    while hi - lo > U_REFINE_TOL {
                        let mid = 0.5 * (lo + hi);
                        match fields.point(spec, h_r1, mid).escape {
                            Some(e) if e == a => lo = mid,
                            _ => hi = mid,
                        }
                    }
                }
                transitions.push(Transition { from: a, to: b, u: 0.5 * (lo + hi), u_lo: lo, u_hi: hi });
            }
        }
    }

    let best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.status == PointStatus::Ok)
        .max_by(|a, b| a.1.d1.total_cmp(&b.1.d1))
        .map(|(k, _)| k);
    let peak = best.map(|k| {
        let coarse = Peak { u: points[k].u, d1: points[k].d1 };
        if !spec.refine || k == 0 || k + 1 == points.len() {
            return coarse;
        }
        refine_peak(|u| fields.point(spec, h_r1, u).d1, points[k - 1].u, points[k + 1].u).unwrap_or(coarse)
    });
    let enhancement = match (points.first(), peak) {
        (Some(p0), Some(pk)) if p0.u == 0.0 && p0.status == PointStatus::Ok => Some(pk.d1 / p0.d1),
        _ => None,
    };
    Ok(TopPlateCurve { h_r1, points, transitions, peak, enhancement })
}

// Golden-section search; the depth has a kink at its maximum, so no smoothness is assumed.
fn refine_peak(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<Peak> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > U_REFINE_TOL {
        if !(fc.is_finite() && fd.is_finite()) {
            return None;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let (u, d1) = if fc > fd { (c, fc) } else { (d, fd) };
    d1.is_finite().then_some(Peak { u, d1 })
}

/// d1 against u for each plate height.
pub fn sweep_top_plate(spec: &TopPlateSweepSpec) -> Result<TopPlateSweep, AnalysisError> {
    spec.validate()?;
    let curves = spec.h_r1.par_iter().map(|&h| curve(spec, h)).collect::<Result<Vec<_>, _>>()?;
    Ok(TopPlateSweep { spec: spec.clone(), curves })
}

pub fn write_top_plate_csv<W: Write>(mut w: W, sweep: &TopPlateSweep, meta: &[(&str, String)]) -> std::io::Result<()> {
    meta_lines(&mut w, meta)?;
    writeln!(w, "h_r1,u,U_V,d1,f1_x,f1_y,r0_r1,depth_eV,escape,status")?;
    for c in &sweep.curves {
        for p in &c.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_num(c.h_r1),
                fmt_num(p.u),
                fmt_num(p.u_plate),
                fmt_num(p.d1),
                fmt_num(p.f1_x),
                fmt_num(p.f1_y),
                fmt_num(p.r0_r1),
                fmt_num(p.depth_ev),
                opt_escape(p.escape),
                p.status.as_str()
            )?;
        }
    }
    Ok(())
}

/// One d1(u) curve per plate height.
pub fn top_plate_gnuplot(csv: &str, h_r1: &[f64]) -> String {
    let plots: Vec<String> = h_r1
        .iter()
        .map(|h| {
            format!(
                "\"{csv}\" using ($1=={} ? $2 : 1/0):4 with linespoints title \"h/r_1 = {h}\"",
                fmt_num(*h)
            )
        })
        .collect();
    format!(
        "set datafile separator \",\"\nset xlabel \"u\"\nset ylabel \"d_1\"\nset terminal pngcairo size 800,600\nset output \"d1.png\"\nplot {}\n",
        plots.join(", \\\n     ")
    )
}
