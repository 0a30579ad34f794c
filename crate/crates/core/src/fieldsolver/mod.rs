//! Unit-voltage basis potentials of a layout and their composition into RF and DC fields.
//!
//! Boundary model: the electrode plane `y = 0` is Dirichlet everywhere. On a strip the
//! potential is the strip's voltage, across a gap it is interpolated linearly between the
//! two neighbouring strips, and outside the outermost strips it is 0. The side walls are
//! grounded and the lid is grounded unless it is a top plate. With a top plate, the side
//! walls carry the parallel-plate ramp `U·y/h`, which is the far field of an infinitely
//! wide plate above an infinite plane.

pub mod cache;
pub mod multigrid;
pub mod sor;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{TrapLayout, TOP_PLATE};
use crate::grid::{GridError, GridSpec, ScalarGrid, VectorGrid};

/// Default convergence tolerance on the scaled Laplacian residual.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("SOR did not converge for `{electrode}` after {iterations} sweeps (residual {residual:.3e})")]
    NotConverged { electrode: String, iterations: usize, residual: f64 },
    #[error("unknown electrode `{0}`")]
    UnknownElectrode(String),
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Potential per volt applied to one conductor, all others grounded.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisPotential {
    pub electrode_id: String,
    pub values: ScalarGrid,
}

/// All basis potentials of a layout on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub layout_hash: String,
    pub grid: GridSpec,
    pub rf_ids: Vec<String>,
    pub bases: Vec<BasisPotential>,
}

impl BasisSet {
    pub fn get(&self, id: &str) -> Option<&BasisPotential> {
        self.bases.iter().find(|b| b.electrode_id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.bases.iter().map(|b| b.electrode_id.as_str())
    }

    /// Sum of all basis potentials.
    pub fn sum(&self) -> ScalarGrid {
        let mut out = ScalarGrid::zeros(self.grid);
        for b in &self.bases {
            out.add_scaled(&b.values, 1.0).expect("bases share the grid");
        }
        out
    }
}

/// Voltage at height-zero position `x` for a given per-conductor assignment.
fn plane_value(layout: &TrapLayout, volts: &dyn Fn(&str) -> f64, x: f64) -> f64 {
    let es = layout.electrodes();
    for (k, e) in es.iter().enumerate() {
        if x >= e.x_min && x <= e.x_max {
            return volts(&e.id);
        }
        if x < e.x_min {
            // in the gap left of strip k, or left of every strip
            return match k {
                0 => 0.0,
                _ => {
                    let prev = &es[k - 1];
                    let t = (x - prev.x_max) / (e.x_min - prev.x_max);
                    volts(&prev.id) * (1.0 - t) + volts(&e.id) * t
                }
            };
        }
    }
    0.0
}

/// Grid holding the Dirichlet data for `id` on its boundary ring and zero inside.
pub fn boundary_grid(layout: &TrapLayout, grid: GridSpec, id: &str) -> Result<ScalarGrid, SolverError> {
    let is_plate = id == TOP_PLATE;
    if is_plate && layout.top_plate().is_none() || !is_plate && layout.electrode(id).is_none() {
        return Err(SolverError::UnknownElectrode(id.to_string()));
    }
    let volts = |e: &str| if e == id { 1.0 } else { 0.0 };
    let mut g = ScalarGrid::zeros(grid);
    let h = grid.y_max();
    for j in 0..grid.rows() {
        let side = if is_plate { grid.y(j) / h } else { 0.0 };
        let k0 = grid.idx(0, j);
        let k1 = grid.idx(grid.nx, j);
        g.values[k0] = side;
        g.values[k1] = side;
    }
    for i in 0..grid.cols() {
        let top = grid.idx(i, grid.ny);
        g.values[top] = if is_plate { 1.0 } else { 0.0 };
        let bottom = grid.idx(i, 0);
        g.values[bottom] = if is_plate { 0.0 } else { plane_value(layout, &volts, grid.x(i)) };
    }
    Ok(g)
}

/// Solve every conductor's unit-voltage problem; bases are solved concurrently.
pub fn solve_basis(layout: &TrapLayout, grid: GridSpec, tol: f64) -> Result<BasisSet, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::BadTolerance);
    }
    grid.check_resolves(layout)?;
    let ids = layout.conductor_ids();
    let bases = ids
        .par_iter()
        .map(|id| {
            let mut phi = boundary_grid(layout, grid, id)?;
            let rep = multigrid::solve(&mut phi, tol, multigrid::MAX_CYCLES);
            log::debug!("basis `{id}`: {} cycles, residual {:.3e}", rep.iterations, rep.residual);
            if !rep.converged {
                return Err(SolverError::NotConverged {
                    electrode: id.clone(),
                    iterations: rep.iterations,
                    residual: rep.residual,
                });
            }
            Ok(BasisPotential { electrode_id: id.clone(), values: phi })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BasisSet {
        layout_hash: cache::layout_hash(layout, &grid),
        grid,
        rf_ids: layout.rf_ids().map(str::to_string).collect(),
        bases,
    })
}

/// One solve with each listed conductor held at its weight and the rest grounded.
///
/// Equals the weighted sum of the bases. Grid resolution is not checked, so callers
/// trading gap resolution for box size (sweeps) can use coarser grids.
pub fn solve_combination(
    layout: &TrapLayout,
    grid: GridSpec,
    tol: f64,
    weights: &[(&str, f64)],
) -> Result<ScalarGrid, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::BadTolerance);
    }
    let mut phi = ScalarGrid::zeros(grid);
    for (id, w) in weights {
        phi.add_scaled(&boundary_grid(layout, grid, id)?, *w)?;
    }
    let rep = multigrid::solve(&mut phi, tol, multigrid::MAX_CYCLES);
    if !rep.converged {
        let id = weights.iter().map(|(id, _)| *id).collect::<Vec<_>>().join("+");
        return Err(SolverError::NotConverged { electrode: id, iterations: rep.iterations, residual: rep.residual });
    }
    Ok(phi)
}

/// Applied voltages. `dc` may name any conductor including the top plate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Voltages {
    /// RF amplitude V on every RF-role strip.
    pub rf_amplitude: f64,
    pub dc: BTreeMap<String, f64>,
    /// Top-plate bias U.
    pub top_plate: f64,
}

/// `φ(x, y, t) = φ_RF(x, y)·cos Ωt + φ_DC(x, y)`, stored as its two parts (volts).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub phi_rf: ScalarGrid,
    pub phi_dc: ScalarGrid,
}

impl PotentialField {
    pub fn grid(&self) -> GridSpec {
        self.phi_rf.spec
    }
}

/// Linear combination of basis potentials.
pub fn compose(basis: &BasisSet, v: &Voltages) -> Result<PotentialField, SolverError> {
    let mut phi_rf = ScalarGrid::zeros(basis.grid);
    for id in &basis.rf_ids {
        let b = basis.get(id).ok_or_else(|| SolverError::UnknownElectrode(id.clone()))?;
        phi_rf.add_scaled(&b.values, v.rf_amplitude)?;
    }
    let mut phi_dc = ScalarGrid::zeros(basis.grid);
    for (id, &u) in &v.dc {
        let b = basis.get(id).ok_or_else(|| SolverError::UnknownElectrode(id.clone()))?;
        phi_dc.add_scaled(&b.values, u)?;
    }
    if v.top_plate != 0.0 {
        let b = basis.get(TOP_PLATE).ok_or_else(|| SolverError::UnknownElectrode(TOP_PLATE.to_string()))?;
        phi_dc.add_scaled(&b.values, v.top_plate)?;
    }
    Ok(PotentialField { phi_rf, phi_dc })
}

/// Gradient (V/m) of a scalar grid at a point at least one cell inside the edge.
pub fn gradient(field: &ScalarGrid, x: f64, y: f64) -> Result<[f64; 2], SolverError> {
    Ok(field.gradient(x, y)?)
}

/// Node gradients of every basis, for repeated force evaluation.
pub fn basis_gradients(basis: &BasisSet) -> BTreeMap<String, VectorGrid> {
    basis
        .bases
        .par_iter()
        .map(|b| (b.electrode_id.clone(), b.values.gradient_grid()))
        .collect()
}

/// Writes `x,y,value` rows for one basis.
pub fn write_basis_csv<W: std::io::Write>(mut w: W, basis: &BasisPotential) -> std::io::Result<()> {
    use crate::units::fmt_num;
    writeln!(w, "# basis {}", basis.electrode_id)?;
    writeln!(w, "x,y,value")?;
    let s = basis.values.spec;
    for j in 0..s.rows() {
        for i in 0..s.cols() {
            writeln!(w, "{},{},{}", fmt_num(s.x(i)), fmt_num(s.y(j)), fmt_num(basis.values.at(i, j)))?;
        }
    }
    Ok(())
}
