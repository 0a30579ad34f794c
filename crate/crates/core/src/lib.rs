//! Design and simulation tools for planar RF (Paul) ion traps.
//!
//! The pipeline runs from a strip-electrode [`geometry`] through a finite-difference
//! [`fieldsolver`] to the time-averaged [`pseudopotential`], with Mathieu [`stability`]
//! analysis, drag-limited [`dynamics`], and the design sweeps in [`analysis`].

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod fieldsolver;
pub mod geometry;
pub mod grid;
pub mod ode;
pub mod pseudopotential;
pub mod stability;
pub mod units;
