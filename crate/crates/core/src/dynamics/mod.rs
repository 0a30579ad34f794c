//! Ion motion: gas drag, RF trajectories, micromotion, and axial transport.

mod axial;
mod gas;
mod shuttle;
mod trajectory;
mod waveform;

use thiserror::Error;

pub use axial::{simulate_axial, AxialElectrode, AxialModel, AxialTrajectory};
pub use gas::{drag_force, slip_correction, GasModel, AIR_MFP_REF, AIR_VISCOSITY, REYNOLDS_ADVISORY};
pub use shuttle::{drag_c, shuttle_time, ShuttleModel, ShuttleSolution};
pub use trajectory::{
    integrate_trajectory, micromotion_analytic, micromotion_from_trajectory, write_trajectory_csv, RunConfig,
    Sample, Trajectory, TrapFields, MIN_MICROMOTION_PERIODS, MIN_STEPS_PER_PERIOD,
};
pub use waveform::{movement_waveform, MovementKind, MovementSpec, Segment, Waveform, CORNER_PULL_VOLTS, PUSH_VOLTS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error("no root of the transit equation in [{lo:e}, {hi:e}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("unknown electrode `{0}`")]
    UnknownElectrode(String),
    #[error("time step {dt:e} s exceeds {max:e} s (50 steps per RF period)")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("initial position ({x:e}, {y:e}) is outside the field region")]
    OutsideDomain { x: f64, y: f64 },
    #[error("non-finite state at t = {t:e} s")]
    NonFinite { t: f64 },
    #[error("only {periods} RF periods of data; {needed} needed")]
    InsufficientData { periods: usize, needed: usize },
}
