//! Command-line front end. Each command resolves its config (file, then flags), writes a
//! manifest, runs, and leaves its artifacts in the output directory.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::analysis::{AnalysisError, AxisRange};
use crate::dynamics::DynamicsError;
use crate::fieldsolver::cache::CacheError;
use crate::fieldsolver::SolverError;
use crate::geometry::GeometryError;
use crate::grid::GridError;
use crate::pseudopotential::PseudoError;
use crate::stability::StabilityError;
use crate::units::{parse_quantity, Dimension, UnitError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => EXIT_VALIDATION,
            ErrorKind::Numerical => EXIT_NUMERICAL,
            ErrorKind::Io => EXIT_IO,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Io => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    pub file: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), file: None, line: None, column: None }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, message)
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Numerical, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self { file: Some(path.display().to_string()), ..Self::new(ErrorKind::Io, e.to_string()) }
    }

    pub fn parse(path: &Path, e: serde_json::Error) -> Self {
        let kind = if e.is_io() { ErrorKind::Io } else { ErrorKind::Validation };
        let (line, column) = if e.line() > 0 { (Some(e.line()), Some(e.column())) } else { (None, None) };
        Self { file: Some(path.display().to_string()), line, column, ..Self::new(kind, e.to_string()) }
    }

    pub fn csv(path: &Path, e: csv::Error) -> Self {
        let kind = if matches!(e.kind(), csv::ErrorKind::Io(_)) { ErrorKind::Io } else { ErrorKind::Validation };
        let line = e.position().map(|p| p.line() as usize);
        Self { file: Some(path.display().to_string()), line, ..Self::new(kind, e.to_string()) }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        json!({
            "error": self.kind.as_str(),
            "exit_code": self.exit_code(),
            "message": self.message,
            "file": self.file,
            "line": self.line,
            "column": self.column,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<UnitError> for CliError {
    fn from(e: UnitError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::TooCoarse { .. } | GridError::BadSpacing => Self::validation(e.to_string()),
            GridError::OutOfDomain { .. } | GridError::ShapeMismatch => Self::numerical(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Grid(g) => g.into(),
            SolverError::NotConverged { .. } => Self::numerical(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<PseudoError> for CliError {
    fn from(e: PseudoError) -> Self {
        match e {
            PseudoError::Grid(g) => g.into(),
            PseudoError::BadDrive(_) => Self::validation(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::NonFinite | StabilityError::NonPositive(_) => Self::validation(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NoRoot { .. } | DynamicsError::NonFinite { .. } | DynamicsError::InsufficientData { .. } => {
                Self::numerical(e.to_string())
            }
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Invalid(m) => Self::validation(m),
            AnalysisError::Geometry(e) => e.into(),
            AnalysisError::Grid(e) => e.into(),
            AnalysisError::Solver(e) => e.into(),
            AnalysisError::Pseudo(e) => e.into(),
            AnalysisError::Stability(e) => e.into(),
            AnalysisError::Dynamics(e) => e.into(),
        }
    }
}

impl From<CacheError> for CliError {
    fn from(e: CacheError) -> Self {
        match e {
            CacheError::Io(_) => Self::new(ErrorKind::Io, e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

fn quantity(s: &str, dim: Dimension) -> Result<f64, String> {
    parse_quantity(s, dim).map_err(|e| e.to_string())
}

fn length(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Length)
}

fn volts(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Voltage)
}

fn frequency(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::AngularFrequency)
}

fn pressure(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Pressure)
}

fn mass(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Mass)
}

fn charge(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Charge)
}

fn field(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::ElectricField)
}

/// `MIN:MAX:POINTS`
fn axis(s: &str) -> Result<AxisRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(format!("expected MIN:MAX:POINTS, got `{s}`"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let n = n.trim().parse::<usize>().map_err(|e| format!("`{n}`: {e}"))?;
    AxisRange::new(num(lo)?, num(hi)?, n).map_err(|e| e.to_string())
}

/// `ID=VOLTS`
fn dc_setting(s: &str) -> Result<(String, f64), String> {
    let (id, v) = s.split_once('=').ok_or_else(|| format!("expected ID=VOLTS, got `{s}`"))?;
    Ok((id.trim().to_string(), volts(v)?))
}

#[derive(Debug, Parser)]
#[command(name = "planar-trap", version, about = "Planar RF ion trap design and dynamics")]
pub struct Cli {
    /// Output directory for manifest, summary and data files.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// JSON config for the command; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Also write a gnuplot script next to the data.
    #[arg(long, global = true)]
    pub gnuplot: bool,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a layout and report its dimensions and default grid.
    Validate(ValidateArgs),
    /// Solve the unit basis potentials of a layout.
    Solve(SolveArgs),
    /// Secular minimum, trap depth and escape direction.
    Depth(AnalyzeArgs),
    /// Secular frequencies at the minimum.
    Freq(AnalyzeArgs),
    /// Floquet stability of the damped Mathieu equation at one (a, q).
    Stability(StabilityArgs),
    /// Edge of the first stability region along q.
    Qmax(QmaxArgs),
    /// Drag-limited transit time across a linear ramp.
    Shuttle(ShuttleArgs),
    /// Integrate an ion in the full time-dependent field.
    Trajectory(TrajectoryArgs),
    /// Depth and frequency map over electrode widths.
    SweepGeometry(SweepGeometryArgs),
    /// Depth versus top-plate bias.
    SweepTopplate(SweepTopPlateArgs),
    /// Charge-to-mass spectrum from ejection frequencies.
    Qm(QmArgs),
    /// Worked Sr⁺ design with and without a top plate.
    DesignExample(DesignArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Solve(_) => "solve",
            Command::Depth(_) => "depth",
            Command::Freq(_) => "freq",
            Command::Stability(_) => "stability",
            Command::Qmax(_) => "qmax",
            Command::Shuttle(_) => "shuttle",
            Command::Trajectory(_) => "trajectory",
            Command::SweepGeometry(_) => "sweep-geometry",
            Command::SweepTopplate(_) => "sweep-topplate",
            Command::Qm(_) => "qm",
            Command::DesignExample(_) => "design-example",
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct LayoutArgs {
    /// Layout JSON file.
    #[arg(long, value_name = "FILE")]
    pub layout: Option<PathBuf>,
    /// Grid spacing (e.g. 5um).
    #[arg(long, value_parser = length)]
    pub spacing: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct IonArgs {
    /// Ion preset: sr88 or microsphere.
    #[arg(long, value_name = "NAME")]
    pub ion: Option<String>,
    #[arg(long, value_parser = charge)]
    pub charge: Option<f64>,
    #[arg(long, value_parser = mass)]
    pub mass: Option<f64>,
    /// Particle radius for drag.
    #[arg(long, value_parser = length)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct DriveArgs {
    /// RF amplitude V.
    #[arg(long, value_parser = volts)]
    pub v_rf: Option<f64>,
    /// Drive frequency Ω (rad/s, or Hz/kHz/MHz).
    #[arg(long, value_parser = frequency)]
    pub omega: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrapArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub ion: IonArgs,
    #[command(flatten)]
    pub drive: DriveArgs,
    /// Top-plate bias U.
    #[arg(long, value_parser = volts)]
    pub u_plate: Option<f64>,
    /// DC bias on one electrode, ID=VOLTS; repeatable.
    #[arg(long, value_parser = dc_setting, value_name = "ID=VOLTS")]
    pub dc: Vec<(String, f64)>,
    /// Relative residual tolerance of the field solve.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Skip the per-electrode CSV files.
    #[arg(long)]
    pub no_csv: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Fit radius as a fraction of r0.
    #[arg(long)]
    pub fit_window: Option<f64>,
    /// Skip the ψ map CSV.
    #[arg(long)]
    pub no_psi: bool,
}

#[derive(Debug, Args)]
pub struct DragArgs {
    /// Dimensionless drag b; replaced by the gas model when --pressure is given.
    #[arg(long)]
    pub b: Option<f64>,
    /// Air pressure (e.g. 70Pa).
    #[arg(long, value_parser = pressure)]
    pub pressure: Option<f64>,
    /// Drive frequency Ω used with --pressure.
    #[arg(long, value_parser = frequency)]
    pub omega: Option<f64>,
    #[command(flatten)]
    pub ion: IonArgs,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Mathieu a.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Mathieu q.
    #[arg(long)]
    pub q: Option<f64>,
    #[command(flatten)]
    pub drag: DragArgs,
}

#[derive(Debug, Args)]
pub struct QmaxArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[command(flatten)]
    pub drag: DragArgs,
}

#[derive(Debug, Args)]
pub struct ShuttleArgs {
    /// Ramp field (e.g. 1V/mm).
    #[arg(long, value_parser = field)]
    pub e_field: Option<f64>,
    /// Ramp length d.
    #[arg(long, value_parser = length)]
    pub length: Option<f64>,
    #[arg(long, value_parser = pressure)]
    pub pressure: Option<f64>,
    /// Pressure scan, comma separated.
    #[arg(long, value_parser = pressure, value_delimiter = ',')]
    pub pressures: Vec<f64>,
    /// Drive frequency for reporting b.
    #[arg(long, value_parser = frequency)]
    pub omega: Option<f64>,
    #[command(flatten)]
    pub ion: IonArgs,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Air pressure for Stokes drag; none means vacuum.
    #[arg(long, value_parser = pressure)]
    pub pressure: Option<f64>,
    /// Start x (defaults to the secular minimum).
    #[arg(long, value_parser = length, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Start y.
    #[arg(long, value_parser = length)]
    pub y0: Option<f64>,
    /// Run length in RF periods.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Fixed RK4 steps per RF period (at least 50).
    #[arg(long)]
    pub steps_per_period: Option<usize>,
    /// Keep every n-th step in the CSV.
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Waveform JSON file.
    #[arg(long, value_name = "FILE")]
    pub waveform: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepGeometryArgs {
    /// w_c/r0 axis as MIN:MAX:POINTS.
    #[arg(long, value_parser = axis)]
    pub wc_r0: Option<AxisRange>,
    /// log10(w_r/r0) axis as MIN:MAX:POINTS.
    #[arg(long, value_parser = axis, allow_hyphen_values = true)]
    pub log10_wr_r0: Option<AxisRange>,
    /// Target ion height the lattice is built at.
    #[arg(long, value_parser = length)]
    pub r0: Option<f64>,
    #[command(flatten)]
    pub drive: DriveArgs,
    #[command(flatten)]
    pub ion: IonArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Grid cells per r0.
    #[arg(long)]
    pub cells_per_r0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepTopPlateArgs {
    #[arg(long)]
    pub wc_r1: Option<f64>,
    #[arg(long)]
    pub wr_r1: Option<f64>,
    /// Plate heights h/r1, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub h_r1: Vec<f64>,
    /// Normalized bias axis as MIN:MAX:POINTS.
    #[arg(long, value_parser = axis, allow_hyphen_values = true)]
    pub u: Option<AxisRange>,
    #[arg(long, value_parser = length)]
    pub r1: Option<f64>,
    #[command(flatten)]
    pub drive: DriveArgs,
    #[command(flatten)]
    pub ion: IonArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Report grid values only; skip the bisection for transitions and the peak.
    #[arg(long)]
    pub no_refine: bool,
}

#[derive(Debug, Args)]
pub struct QmArgs {
    /// CSV of omega_ej,v,r0 records.
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,
    /// Draw this many synthetic records instead (statistics from the config or defaults).
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram bin width in e/amu.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Fixed stability edge.
    #[arg(long)]
    pub q_max: Option<f64>,
    /// Air pressure for a damped stability edge.
    #[arg(long, value_parser = pressure)]
    pub pressure: Option<f64>,
    #[command(flatten)]
    pub ion: IonArgs,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub drive: DriveArgs,
    /// Plate height for the second case.
    #[arg(long, value_parser = length)]
    pub h: Option<f64>,
    #[arg(long, value_parser = volts)]
    pub u_plate: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub steps_per_period: Option<usize>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                eprintln!("{}", CliError::validation(e.kind().to_string()).record());
            }
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::validation("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli))
}
