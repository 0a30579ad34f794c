//! Fixed-step RK4 integration of an ion in the composed RF + DC field.

use std::f64::consts::TAU;
use std::io::Write;

use serde::Serialize;

use super::{DynamicsError, GasModel, Waveform};
use crate::fieldsolver::{basis_gradients, BasisSet};
use crate::geometry::{IonSpecies, TOP_PLATE};
use crate::grid::{GridSpec, VectorGrid};
use crate::ode::rk4_step;
use crate::pseudopotential::DriveConfig;
use crate::units::fmt_num;

/// At least this many steps per RF period.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;
/// Steady-state span needed for a micromotion estimate.
pub const MIN_MICROMOTION_PERIODS: usize = 20;

/// Gradients of every basis potential, ready for force evaluation.
#[derive(Debug, Clone)]
pub struct TrapFields {
    pub grid: GridSpec,
    /// Gradient of the sum of RF bases (per volt of RF amplitude).
    pub rf: VectorGrid,
    pub dc: Vec<(String, VectorGrid)>,
}

impl TrapFields {
    pub fn new(basis: &BasisSet) -> Self {
        let mut grads = basis_gradients(basis);
        let mut rf = VectorGrid::zeros(basis.grid);
        for id in &basis.rf_ids {
            if let Some(g) = grads.remove(id) {
                rf.add_scaled(&g, 1.0).expect("bases share the grid");
            }
        }
        Self { grid: basis.grid, rf, dc: grads.into_iter().collect() }
    }

    /// Inside the region where gradients can be interpolated and above the electrodes.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let s = &self.grid;
        let m = s.spacing;
        x > s.x_min + m && x < s.x_max() - m && y > s.y_min + m && y < s.y_max() - m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub escaped: bool,
    pub escape_time: Option<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every n-th step (the first and last states are always kept).
    pub record_every: usize,
}

impl RunConfig {
    /// `steps` per RF period for `periods` periods.
    pub fn per_period(omega: f64, steps: usize, periods: usize) -> Self {
        let period = TAU / omega;
        Self { dt: period / steps as f64, t_end: period * periods as f64, record_every: 1 }
    }
}

/// DC level of one conductor at time `t`: the waveform wins over the static drive.
fn dc_level(id: &str, t: f64, drive: &DriveConfig, wave: &Waveform) -> f64 {
    wave.voltage(id, t).unwrap_or_else(|| {
        if id == TOP_PLATE {
            drive.u_plate
        } else {
            drive.dc.get(id).copied().unwrap_or(0.0)
        }
    })
}

/// Integrates `m·r̈ = −Q∇φ(r, t) + F_D` from `init = [x, y, vx, vy]`.
pub fn integrate_trajectory(
    fields: &TrapFields,
    waveform: &Waveform,
    drive: &DriveConfig,
    ion: &IonSpecies,
    gas: Option<&GasModel>,
    init: [f64; 4],
    cfg: RunConfig,
) -> Result<Trajectory, DynamicsError> {
    let max_dt = TAU / (MIN_STEPS_PER_PERIOD * drive.omega);
    if !(cfg.dt > 0.0) || cfg.dt > max_dt * (1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge { dt: cfg.dt, max: max_dt });
    }
    if !fields.contains(init[0], init[1]) {
        return Err(DynamicsError::OutsideDomain { x: init[0], y: init[1] });
    }
    let qm = ion.charge / ion.mass;
    let gamma = gas.map_or(0.0, |g| g.gamma(ion));
    let (v, w) = (drive.v_rf, drive.omega);

    // Err(()) marks a stage that left the interpolation region
    let accel = |t: f64, s: &[f64; 4]| -> Result<[f64; 4], ()> {
        let (x, y) = (s[0], s[1]);
        let g = fields.rf.at(x, y).map_err(|_| ())?;
        let c = v * (w * t).cos();
        let (mut ex, mut ey) = (c * g[0], c * g[1]);
        for (id, grad) in &fields.dc {
            let u = dc_level(id, t, drive, waveform);
            if u != 0.0 {
                let g = grad.at(x, y).map_err(|_| ())?;
                ex += u * g[0];
                ey += u * g[1];
            }
        }
        Ok([s[2], s[3], -qm * ex - gamma * s[2], -qm * ey - gamma * s[3]])
    };

    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let every = cfg.record_every.max(1);
    let push = |out: &mut Vec<Sample>, t: f64, s: &[f64; 4]| out.push(Sample { t, x: s[0], y: s[1], vx: s[2], vy: s[3] });
    let mut samples = Vec::with_capacity(n_steps / every + 2);
    let mut s = init;
    push(&mut samples, 0.0, &s);
    let mut failed = false;
    for n in 0..n_steps {
        let t = n as f64 * cfg.dt;
        let next = rk4_step(
            |t, y| {
                accel(t, y).unwrap_or_else(|_| {
                    failed = true;
                    [0.0; 4]
                })
            },
            t,
            &s,
            cfg.dt,
        );
        let t1 = (n + 1) as f64 * cfg.dt;
        if failed || !fields.contains(next[0], next[1]) {
            push(&mut samples, t1, &next);
            return Ok(Trajectory { samples, escaped: true, escape_time: Some(t1), dt: cfg.dt });
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite { t: t1 });
        }
        s = next;
        if (n + 1) % every == 0 || n + 1 == n_steps {
            push(&mut samples, t1, &s);
        }
    }
    if let (Some(g), Some(last)) = (gas, samples.last()) {
        g.check_reynolds(ion, last.vx.hypot(last.vy));
    }
    Ok(Trajectory { samples, escaped: false, escape_time: None, dt: cfg.dt })
}

/// `q·Δy/2`, the micromotion amplitude of an ion held `Δy` off the RF null.
pub fn micromotion_analytic(q: f64, dy: f64) -> f64 {
    0.5 * q.abs() * dy.abs()
}

/// Amplitude at Ω of the displacement after `t_skip`, over a whole number of RF periods.
pub fn micromotion_from_trajectory(traj: &Trajectory, omega: f64, t_skip: f64) -> Result<f64, DynamicsError> {
    let period = TAU / omega;
    let start = traj.samples.iter().position(|s| s.t >= t_skip).unwrap_or(traj.samples.len());
    let tail = &traj.samples[start..];
    let span = match (tail.first(), tail.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    let periods = (span / period + 1e-9).floor() as usize;
    if periods < MIN_MICROMOTION_PERIODS {
        return Err(DynamicsError::InsufficientData { periods, needed: MIN_MICROMOTION_PERIODS });
    }
    let t0 = tail[0].t;
    let t1 = t0 + periods as f64 * period;
    let used: Vec<&Sample> = tail.iter().filter(|s| s.t <= t1 + 1e-9 * period).collect();
    let (mut cx, mut sx, mut cy, mut sy) = (0.0, 0.0, 0.0, 0.0);
    for w in used.windows(2) {
        // trapezoid rule on each interval
        let dt = w[1].t - w[0].t;
        for (p, k) in [(w[0], 0.5 * dt), (w[1], 0.5 * dt)] {
            let (c, s) = ((omega * p.t).cos(), (omega * p.t).sin());
            cx += k * p.x * c;
            sx += k * p.x * s;
            cy += k * p.y * c;
            sy += k * p.y * s;
        }
    }
    let norm = 2.0 / (t1 - t0);
    let ax = norm * cx.hypot(sx);
    let ay = norm * cy.hypot(sy);
    Ok(ax.hypot(ay))
}

/// `t,x,y,vx,vy` rows preceded by `# key: value` metadata lines.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory, meta: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "# escaped: {}", traj.escaped)?;
    writeln!(w, "t_s,x_m,y_m,vx_m_per_s,vy_m_per_s")?;
    for s in &traj.samples {
        writeln!(w, "{},{},{},{},{}", fmt_num(s.t), fmt_num(s.x), fmt_num(s.y), fmt_num(s.vx), fmt_num(s.vy))?;
    }
    Ok(())
}
