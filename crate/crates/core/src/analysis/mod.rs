//! Charge-to-mass spectra, design-map sweeps, and the worked design example.

mod design;
mod qm;
mod sweep;

use thiserror::Error;

pub use design::{design_example, DesignReport, DesignSpec, NoPlateReport, PlateReport};
pub use qm::{
    ejection_omega, qm_from_ejection, qm_spectrum, spectrum_from_values, synthetic_records, Bin, EjectionRecord, QmSpectrum, QmaxSource,
    SyntheticSpec,
};
pub use sweep::{
    gap_estimate, geometry_gnuplot, sweep_geometry, sweep_top_plate, top_plate_gnuplot, write_geometry_csv,
    write_top_plate_csv, AxisRange, GeometryPoint, GeometrySweep, GeometrySweepSpec, Peak, PointStatus, ScaleCheck,
    TopPlateCurve, TopPlatePoint, TopPlateSweep, TopPlateSweepSpec, Transition, G_R0_RANGE, R0_REL_TOL,
    SWEEP_CELLS_PER_R0, SWEEP_DOMAIN,
};

use crate::dynamics::DynamicsError;
use crate::fieldsolver::SolverError;
use crate::geometry::GeometryError;
use crate::grid::GridError;
use crate::pseudopotential::PseudoError;
use crate::stability::StabilityError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Pseudo(#[from] PseudoError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
