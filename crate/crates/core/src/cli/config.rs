//! Per-command configuration records. Every field has a default, so a config file
//! only needs the values it changes; flags are applied on top.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::analysis::{EjectionRecord, SyntheticSpec};
use crate::dynamics::{GasModel, Waveform};
use crate::fieldsolver::DEFAULT_TOL;
use crate::geometry::{IonSpecies, LayoutFile};
use crate::pseudopotential::{DriveConfig, DEFAULT_FIT_WINDOW};
use crate::units::de;

/// Reads a JSON config; syntax and type errors keep their line and column.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::parse(p, e))
        }
    }
}

pub fn read_layout(path: &Path) -> Result<LayoutFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

pub fn read_waveform(path: &Path) -> Result<Waveform, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw: Waveform = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    Ok(Waveform::new(raw.segments)?)
}

/// `omega_ej,v,r0` rows; `#` starts a comment line. Values may carry unit suffixes.
pub fn read_records(path: &Path) -> Result<Vec<EjectionRecord>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| CliError::csv(path, e))).collect()
}

fn sr88() -> IonSpecies {
    IonSpecies::sr88_plus()
}

fn microsphere() -> IonSpecies {
    IonSpecies::microsphere()
}

/// Layout, grid and drive shared by the field-based commands. Always flattened into
/// a command record, which does the unknown-field check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrapConfig {
    pub layout: Option<LayoutFile>,
    /// Grid spacing; defaults to an eighth of the smallest gap.
    #[serde(deserialize_with = "de::opt_length")]
    pub spacing: Option<f64>,
    pub tol: f64,
    pub ion: IonSpecies,
    #[serde(deserialize_with = "de::volts")]
    pub v_rf: f64,
    #[serde(deserialize_with = "de::angular_frequency")]
    pub omega: f64,
    #[serde(deserialize_with = "de::volts")]
    pub u_plate: f64,
    #[serde(deserialize_with = "de::volts_map")]
    pub dc: BTreeMap<String, f64>,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            layout: None,
            spacing: None,
            tol: DEFAULT_TOL,
            ion: sr88(),
            v_rf: 500.0,
            omega: TAU * 1e7,
            u_plate: 0.0,
            dc: BTreeMap::new(),
        }
    }
}

impl TrapConfig {
    pub fn layout(&self) -> Result<&LayoutFile, CliError> {
        self.layout.as_ref().ok_or_else(|| CliError::validation("no layout given (use --layout or a `layout` entry)"))
    }

    pub fn drive(&self) -> Result<DriveConfig, CliError> {
        let mut d = DriveConfig::new(self.v_rf, self.omega)?.with_plate(self.u_plate);
        for (id, v) in &self.dc {
            d = d.with_dc(id, *v);
        }
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub layout: Option<LayoutFile>,
    #[serde(deserialize_with = "de::opt_length")]
    pub spacing: Option<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { layout: None, spacing: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub layout: Option<LayoutFile>,
    #[serde(deserialize_with = "de::opt_length")]
    pub spacing: Option<f64>,
    pub tol: f64,
    /// Also write each basis potential as CSV.
    pub write_csv: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { layout: None, spacing: None, tol: DEFAULT_TOL, write_csv: true }
    }
}

/// `depth` and `freq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(flatten)]
    pub trap: TrapConfig,
    /// Fit radius as a fraction of r0.
    pub fit_window: f64,
    /// Write the ψ map as CSV.
    pub write_psi: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self { trap: TrapConfig::default(), fit_window: DEFAULT_FIT_WINDOW, write_psi: true }
    }
}

/// Damping source: explicit `b`, or air at `pressure` acting on `ion` at drive `omega`.
/// Flattened like [`TrapConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DragConfig {
    pub b: f64,
    #[serde(deserialize_with = "de::opt_pressure")]
    pub pressure: Option<f64>,
    #[serde(deserialize_with = "de::opt_angular_frequency")]
    pub omega: Option<f64>,
    pub ion: IonSpecies,
}

impl Default for DragConfig {
    fn default() -> Self {
        Self { b: 0.0, pressure: None, omega: None, ion: microsphere() }
    }
}

impl DragConfig {
    pub fn gas(&self) -> Result<Option<GasModel>, CliError> {
        self.pressure.map(GasModel::air).transpose().map_err(Into::into)
    }

    pub fn resolve_b(&self) -> Result<f64, CliError> {
        match self.gas()? {
            None => Ok(self.b),
            Some(g) => {
                let w = self.omega.ok_or_else(|| CliError::validation("a pressure needs the drive frequency `omega`"))?;
                Ok(crate::stability::drag_b(&g, &self.ion, w)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub a: f64,
    pub q: f64,
    #[serde(flatten)]
    pub drag: DragConfig,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { a: 0.0, q: 0.5, drag: DragConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmaxConfig {
    pub a: f64,
    #[serde(flatten)]
    pub drag: DragConfig,
}

impl Default for QmaxConfig {
    fn default() -> Self {
        Self { a: 0.0, drag: DragConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShuttleConfig {
    #[serde(deserialize_with = "de::field")]
    pub e_field: f64,
    #[serde(deserialize_with = "de::length")]
    pub length: f64,
    /// Single air pressure; ignored when `pressures` is non-empty.
    #[serde(deserialize_with = "de::pressure")]
    pub pressure: f64,
    /// Pressure scan written as CSV.
    pub pressures: Vec<f64>,
    /// RF drive used to report the Mathieu drag `b` alongside `c`.
    #[serde(deserialize_with = "de::opt_angular_frequency")]
    pub omega: Option<f64>,
    pub ion: IonSpecies,
}

impl Default for ShuttleConfig {
    fn default() -> Self {
        Self {
            e_field: 1e3,
            length: 1e-3,
            pressure: 70.0,
            pressures: Vec::new(),
            omega: Some(TAU * 5e3),
            ion: microsphere(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(flatten)]
    pub trap: TrapConfig,
    #[serde(deserialize_with = "de::opt_pressure")]
    pub pressure: Option<f64>,
    /// Start position; defaults to the secular minimum.
    pub start: Option<[f64; 2]>,
    pub velocity: [f64; 2],
    pub periods: usize,
    pub steps_per_period: usize,
    pub record_every: usize,
    pub waveform: Option<Waveform>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            trap: TrapConfig::default(),
            pressure: None,
            start: None,
            velocity: [0.0, 0.0],
            periods: 40,
            steps_per_period: 200,
            record_every: 1,
            waveform: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmConfig {
    pub records: Vec<EjectionRecord>,
    pub synthetic: Option<SyntheticSpec>,
    /// Histogram bin width in e/amu.
    pub bin_width: f64,
    /// Fixed stability edge; overrides the gas model.
    pub q_max: Option<f64>,
    /// Air pressure for a per-record damped `q_max`, using `ion` as the particle model.
    #[serde(deserialize_with = "de::opt_pressure")]
    pub pressure: Option<f64>,
    pub ion: IonSpecies,
}

impl Default for QmConfig {
    fn default() -> Self {
        Self { records: Vec::new(), synthetic: None, bin_width: 0.1e-8, q_max: None, pressure: None, ion: microsphere() }
    }
}
