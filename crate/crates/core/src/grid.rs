//! Uniform node grids over the solve box and interpolation on them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::TrapLayout;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("point ({x:.6e}, {y:.6e}) is outside the usable grid area")]
    OutOfDomain { x: f64, y: f64 },
    #[error("grid spacing {spacing:.4e} m does not resolve the smallest gap {gap:.4e} m (need spacing <= gap/8)")]
    TooCoarse { spacing: f64, gap: f64 },
    #[error("grid spacing must be positive")]
    BadSpacing,
    #[error("grids have different shapes")]
    ShapeMismatch,
}

/// `for_layout` rounds both cell counts to multiples of this so multigrid can coarsen.
pub const COARSEN_MULTIPLE: usize = 16;

fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Cell counts `nx × ny` at uniform `spacing`, origin `(x_min, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub y_min: f64,
    pub spacing: f64,
}

/// Minimum number of cells across the smallest gap.
pub const CELLS_PER_GAP: f64 = 8.0;

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x_min: f64, y_min: f64, spacing: f64) -> Result<Self, GridError> {
        if !(spacing > 0.0) || nx < 2 || ny < 2 {
            return Err(GridError::BadSpacing);
        }
        Ok(Self { nx, ny, x_min, y_min, spacing })
    }

    /// Grid over a layout's domain with at most `spacing` between nodes.
    ///
    /// The spacing is shrunk so the lid (or top plate) falls exactly on the last row,
    /// and the box is widened to a whole number of cells, symmetric about x = 0.
    pub fn for_layout(layout: &TrapLayout, spacing: f64) -> Result<Self, GridError> {
        let spec = Self::covering(layout, spacing)?;
        spec.check_resolves(layout)?;
        Ok(spec)
    }

    /// [`GridSpec::for_layout`] without the gap-resolution check.
    pub fn covering(layout: &TrapLayout, spacing: f64) -> Result<Self, GridError> {
        if !(spacing > 0.0) {
            return Err(GridError::BadSpacing);
        }
        let dom = layout.domain();
        let ny = round_up((dom.y_max / spacing).ceil().max(2.0) as usize, COARSEN_MULTIPLE);
        let h = dom.y_max / ny as f64;
        let half = dom.x_max.abs().max(dom.x_min.abs());
        let nxh = round_up((half / h - 1e-9).ceil().max(1.0) as usize, COARSEN_MULTIPLE / 2);
        Ok(Self { nx: 2 * nxh, ny, x_min: -(nxh as f64) * h, y_min: 0.0, spacing: h })
    }

    /// Default grid: eight cells across the smallest gap.
    pub fn default_for(layout: &TrapLayout) -> Result<Self, GridError> {
        let gap = layout.min_gap().unwrap_or(layout.domain().y_max / 200.0);
        Self::for_layout(layout, gap / CELLS_PER_GAP)
    }

    pub fn check_resolves(&self, layout: &TrapLayout) -> Result<(), GridError> {
        if let Some(gap) = layout.min_gap() {
            if self.spacing > gap / CELLS_PER_GAP * (1.0 + 1e-9) {
                return Err(GridError::TooCoarse { spacing: self.spacing, gap });
            }
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        self.nx + 1
    }

    pub fn rows(&self) -> usize {
        self.ny + 1
    }

    pub fn len(&self) -> usize {
        self.cols() * self.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.nx as f64 * self.spacing
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.ny as f64 * self.spacing
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.cols() + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.spacing
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Nearest node to a point, clamped to the grid.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let fi = ((x - self.x_min) / self.spacing).round().clamp(0.0, self.nx as f64);
        let fj = ((y - self.y_min) / self.spacing).round().clamp(0.0, self.ny as f64);
        (fi as usize, fj as usize)
    }

    /// Cell containing the point plus fractional offsets, if at least `margin` cells from every edge.
    fn locate(&self, x: f64, y: f64, margin: f64) -> Result<(usize, usize, f64, f64), GridError> {
        let fx = (x - self.x_min) / self.spacing;
        let fy = (y - self.y_min) / self.spacing;
        let lim_x = self.nx as f64 - margin;
        let lim_y = self.ny as f64 - margin;
        if !(fx >= margin && fx <= lim_x && fy >= margin && fy <= lim_y) {
            return Err(GridError::OutOfDomain { x, y });
        }
        let i = (fx.floor() as usize).min(self.nx - 1);
        let j = (fy.floor() as usize).min(self.ny - 1);
        Ok((i, j, fx - i as f64, fy - j as f64))
    }

    /// Stable textual key used for hashing.
    pub fn key(&self) -> String {
        format!(
            "{}x{}@{:016x},{:016x},{:016x}",
            self.nx,
            self.ny,
            self.x_min.to_bits(),
            self.y_min.to_bits(),
            self.spacing.to_bits()
        )
    }
}

/// Scalar values on the nodes of a [`GridSpec`], row-major in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { values: vec![0.0; spec.len()], spec }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.rows() {
            for i in 0..spec.cols() {
                values.push(f(spec.x(i), spec.y(j)));
            }
        }
        Self { spec, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.idx(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + k·other`, in place.
    pub fn add_scaled(&mut self, other: &ScalarGrid, k: f64) -> Result<(), GridError> {
        if self.spec != other.spec {
            return Err(GridError::ShapeMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += k * b;
        }
        Ok(())
    }

    /// Bilinear interpolation anywhere inside the grid.
    pub fn value_at(&self, x: f64, y: f64) -> Result<f64, GridError> {
        let (i, j, tx, ty) = self.spec.locate(x, y, 0.0)?;
        Ok(bilinear(
            [self.at(i, j), self.at(i + 1, j), self.at(i, j + 1), self.at(i + 1, j + 1)],
            tx,
            ty,
        ))
    }

    /// Finite-difference gradient at a node: central inside, second-order one-sided on edges.
    pub fn node_gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let s = &self.spec;
        let h = s.spacing;
        let gx = if i == 0 {
            (-3.0 * self.at(0, j) + 4.0 * self.at(1, j) - self.at(2, j)) / (2.0 * h)
        } else if i == s.nx {
            (3.0 * self.at(i, j) - 4.0 * self.at(i - 1, j) + self.at(i - 2, j)) / (2.0 * h)
        } else {
            (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * h)
        };
        let gy = if j == 0 {
            (-3.0 * self.at(i, 0) + 4.0 * self.at(i, 1) - self.at(i, 2)) / (2.0 * h)
        } else if j == s.ny {
            (3.0 * self.at(i, j) - 4.0 * self.at(i, j - 1) + self.at(i, j - 2)) / (2.0 * h)
        } else {
            (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * h)
        };
        [gx, gy]
    }

    /// Node gradients over the whole grid.
    pub fn gradient_grid(&self) -> VectorGrid {
        let s = self.spec;
        let mut gx = Vec::with_capacity(s.len());
        let mut gy = Vec::with_capacity(s.len());
        for j in 0..s.rows() {
            for i in 0..s.cols() {
                let g = self.node_gradient(i, j);
                gx.push(g[0]);
                gy.push(g[1]);
            }
        }
        VectorGrid { spec: s, gx, gy }
    }

    /// Bilinear interpolation of central-difference node gradients.
    ///
    /// The point must lie at least one cell inside the grid edge.
    pub fn gradient(&self, x: f64, y: f64) -> Result<[f64; 2], GridError> {
        let (i, j, tx, ty) = self.spec.locate(x, y, 1.0)?;
        let g00 = self.node_gradient(i, j);
        let g10 = self.node_gradient(i + 1, j);
        let g01 = self.node_gradient(i, j + 1);
        let g11 = self.node_gradient(i + 1, j + 1);
        Ok([
            bilinear([g00[0], g10[0], g01[0], g11[0]], tx, ty),
            bilinear([g00[1], g10[1], g01[1], g11[1]], tx, ty),
        ])
    }
}

/// Precomputed node gradients of a scalar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    pub spec: GridSpec,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl VectorGrid {
    /// Bilinear interpolation, valid at least one cell inside the edge.
    pub fn at(&self, x: f64, y: f64) -> Result<[f64; 2], GridError> {
        let (i, j, tx, ty) = self.spec.locate(x, y, 1.0)?;
        let s = &self.spec;
        let k = [s.idx(i, j), s.idx(i + 1, j), s.idx(i, j + 1), s.idx(i + 1, j + 1)];
        Ok([
            bilinear(k.map(|k| self.gx[k]), tx, ty),
            bilinear(k.map(|k| self.gy[k]), tx, ty),
        ])
    }

    pub fn add_scaled(&mut self, other: &VectorGrid, k: f64) -> Result<(), GridError> {
        if self.spec != other.spec {
            return Err(GridError::ShapeMismatch);
        }
        for (a, b) in self.gx.iter_mut().zip(&other.gx) {
            *a += k * b;
        }
        for (a, b) in self.gy.iter_mut().zip(&other.gy) {
            *a += k * b;
        }
        Ok(())
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, gx: vec![0.0; spec.len()], gy: vec![0.0; spec.len()] }
    }
}

#[inline]
fn bilinear(v: [f64; 4], tx: f64, ty: f64) -> f64 {
    let [v00, v10, v01, v11] = v;
    (v00 * (1.0 - tx) + v10 * tx) * (1.0 - ty) + (v01 * (1.0 - tx) + v11 * tx) * ty
}
