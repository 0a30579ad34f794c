use std::f64::consts::TAU;
use std::io::{self, Write};

use serde::Serialize;
use serde_json::json;

use super::config::{
    self, AnalyzeConfig, QmConfig, QmaxConfig, ShuttleConfig, SolveConfig, StabilityConfig, TrajectoryConfig,
    TrapConfig, ValidateConfig,
};
use super::output::Artifacts;
use super::*;
use crate::analysis::{
    design_example, geometry_gnuplot, qm_from_ejection, qm_spectrum, spectrum_from_values, sweep_geometry,
    sweep_top_plate, synthetic_records, top_plate_gnuplot, write_geometry_csv, write_top_plate_csv, DesignSpec,
    EjectionRecord, GeometrySweepSpec, QmSpectrum, SyntheticSpec, TopPlateSweepSpec,
};
use crate::dynamics::{
    integrate_trajectory, micromotion_from_trajectory, shuttle_time, write_trajectory_csv, GasModel, RunConfig,
    ShuttleModel, TrapFields, Waveform, MIN_MICROMOTION_PERIODS,
};
use crate::fieldsolver::cache::write_cache;
use crate::fieldsolver::{compose, solve_basis, write_basis_csv};
use crate::geometry::{IonSpecies, LayoutFile, TrapLayout};
use crate::grid::GridSpec;
use crate::pseudopotential::{
    analyze, normalize, write_psi_csv, AnalysisOptions, NormScale, SecularMap, Summary,
};
use crate::stability::{drag_b, is_stable, qmax, MathieuParams};
use crate::units::{fmt_num, C_PER_KG_TO_E_PER_AMU};

pub(super) fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Validate(a) => validate(cli, config::load(file)?, a),
        Command::Solve(a) => solve(cli, config::load(file)?, a),
        Command::Depth(a) => depth_or_freq(cli, config::load(file)?, a, false),
        Command::Freq(a) => depth_or_freq(cli, config::load(file)?, a, true),
        Command::Stability(a) => stability(cli, config::load(file)?, a),
        Command::Qmax(a) => qmax_cmd(cli, config::load(file)?, a),
        Command::Shuttle(a) => shuttle(cli, config::load(file)?, a),
        Command::Trajectory(a) => trajectory(cli, config::load(file)?, a),
        Command::SweepGeometry(a) => sweep_geometry_cmd(cli, config::load(file)?, a),
        Command::SweepTopplate(a) => sweep_top_plate_cmd(cli, config::load(file)?, a),
        Command::Qm(a) => qm(cli, config::load(file)?, a),
        Command::DesignExample(a) => design(cli, config::load(file)?, a),
    }
}

fn set<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

fn apply_ion(args: &IonArgs, ion: &mut IonSpecies) -> Result<(), CliError> {
    if let Some(name) = &args.ion {
        *ion = IonSpecies::preset(name)?;
    }
    set(&mut ion.charge, args.charge);
    set(&mut ion.mass, args.mass);
    set(&mut ion.radius, args.radius);
    *ion = IonSpecies::new(ion.charge, ion.mass, ion.radius)?;
    Ok(())
}

fn apply_layout(args: &LayoutArgs, layout: &mut Option<LayoutFile>, spacing: &mut Option<f64>) -> Result<(), CliError> {
    if let Some(p) = &args.layout {
        *layout = Some(config::read_layout(p)?);
    }
    if args.spacing.is_some() {
        *spacing = args.spacing;
    }
    Ok(())
}

fn apply_trap(args: &TrapArgs, t: &mut TrapConfig) -> Result<(), CliError> {
    apply_layout(&args.layout, &mut t.layout, &mut t.spacing)?;
    apply_ion(&args.ion, &mut t.ion)?;
    set(&mut t.v_rf, args.drive.v_rf);
    set(&mut t.omega, args.drive.omega);
    set(&mut t.u_plate, args.u_plate);
    set(&mut t.tol, args.tol);
    for (id, v) in &args.dc {
        t.dc.insert(id.clone(), *v);
    }
    Ok(())
}

fn grid_for(layout: &TrapLayout, spacing: Option<f64>) -> Result<GridSpec, CliError> {
    Ok(match spacing {
        Some(s) => GridSpec::for_layout(layout, s)?,
        None => GridSpec::default_for(layout)?,
    })
}

fn write_meta<W: Write>(w: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

/// Prints the summary to stdout and stores it with the manifest.
fn finish<T: Serialize>(mut art: Artifacts, summary: &T) -> Result<(), CliError> {
    art.write_summary(summary)?;
    let dir = art.finish()?;
    // a closed stdout is not an error; the summary is on disk
    let _ = writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(summary).expect("summaries serialize"));
    log::info!("outputs in {}", dir.display());
    Ok(())
}

fn validate(cli: &Cli, mut cfg: ValidateConfig, a: &ValidateArgs) -> Result<(), CliError> {
    apply_layout(&a.layout, &mut cfg.layout, &mut cfg.spacing)?;
    let art = Artifacts::create(&cli.out, "validate", &cfg)?;
    let file = cfg.layout.as_ref().ok_or_else(|| CliError::validation("no layout given"))?;
    let layout = file.build()?;
    let grid = grid_for(&layout, cfg.spacing)?;
    let summary = json!({
        "valid": true,
        "r1": layout.r1().ok(),
        "min_gap": layout.min_gap(),
        "electrodes": layout.electrodes(),
        "top_plate": layout.top_plate(),
        "domain": layout.domain(),
        "grid": grid,
        "nodes": grid.len(),
    });
    finish(art, &summary)
}

fn solve(cli: &Cli, mut cfg: SolveConfig, a: &SolveArgs) -> Result<(), CliError> {
    apply_layout(&a.layout, &mut cfg.layout, &mut cfg.spacing)?;
    set(&mut cfg.tol, a.tol);
    if a.no_csv {
        cfg.write_csv = false;
    }
    let mut art = Artifacts::create(&cli.out, "solve", &cfg)?;
    let layout = cfg.layout.as_ref().ok_or_else(|| CliError::validation("no layout given"))?.build()?;
    let grid = grid_for(&layout, cfg.spacing)?;
    let basis = solve_basis(&layout, grid, cfg.tol)?;
    let path = art.dir().join("basis.cache");
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write_cache(io::BufWriter::new(file), &basis)?;
    art.record("basis.cache");
    let meta = art.meta();
    let mut files = Vec::new();
    if cfg.write_csv {
        for b in &basis.bases {
            let name = format!("basis_{}.csv", b.electrode_id);
            art.write_with(&name, |w| {
                write_meta(w, &meta)?;
                write_basis_csv(w, b)
            })?;
            files.push(name);
        }
    }
    if cli.gnuplot && !files.is_empty() {
        let plots: String = files
            .iter()
            .map(|f| format!("set output \"{}.png\"\nset title \"{f}\"\nplot \"{f}\" using 1:2:3 with image notitle\n", f.trim_end_matches(".csv")))
            .collect();
        art.write_with("plot.gp", |w| {
            write!(w, "set datafile separator \",\"\nset xlabel \"x (m)\"\nset ylabel \"y (m)\"\nset terminal pngcairo size 900,600\n{plots}")
        })?;
    }
    let summary = json!({
        "layout_hash": basis.layout_hash,
        "grid": basis.grid,
        "nodes": basis.grid.len(),
        "conductors": basis.ids().collect::<Vec<_>>(),
        "rf_ids": basis.rf_ids,
    });
    finish(art, &summary)
}

#[derive(Serialize)]
struct AnalysisSummary {
    #[serde(flatten)]
    summary: Summary,
    y0: f64,
    psi_min_j: f64,
    saddle: (f64, f64),
    freq_x_hz: f64,
    freq_y_hz: f64,
    axis_angle: f64,
    fit_radius: f64,
    fit_nodes: usize,
    scale: NormScale,
    grid: GridSpec,
}

fn analyze_trap(trap: &TrapConfig, fit_window: f64) -> Result<(SecularMap, AnalysisSummary), CliError> {
    let layout = trap.layout()?.build()?;
    let grid = grid_for(&layout, trap.spacing)?;
    let drive = trap.drive()?;
    let basis = solve_basis(&layout, grid, trap.tol)?;
    let field = compose(&basis, &drive.voltages())?;
    let opts = AnalysisOptions { fit_window, ..AnalysisOptions::for_layout(&layout) };
    let map = analyze(&field, &trap.ion, &drive, &opts)?;
    let r1 = layout.r1().ok();
    let (scale, plate) = match (layout.top_plate(), r1) {
        (Some(p), Some(r1)) => (NormScale::R1(r1), Some((p.height, r1))),
        _ => (NormScale::R0(map.r0), None),
    };
    let norm = normalize(map.depth.depth, map.omega.as_array(), &trap.ion, &drive, scale, plate)?;
    let s = AnalysisSummary {
        summary: Summary::new(&map, &norm),
        y0: map.minimum.y,
        psi_min_j: map.minimum.value,
        saddle: map.depth.saddle,
        freq_x_hz: map.omega.omega_x / TAU,
        freq_y_hz: map.omega.omega_y / TAU,
        axis_angle: map.omega.axis_angle,
        fit_radius: map.omega.fit_radius,
        fit_nodes: map.omega.fit_nodes,
        scale,
        grid,
    };
    Ok((map, s))
}

fn depth_or_freq(cli: &Cli, mut cfg: AnalyzeConfig, a: &AnalyzeArgs, freq: bool) -> Result<(), CliError> {
    apply_trap(&a.trap, &mut cfg.trap)?;
    set(&mut cfg.fit_window, a.fit_window);
    if a.no_psi {
        cfg.write_psi = false;
    }
    let name = if freq { "freq" } else { "depth" };
    let mut art = Artifacts::create(&cli.out, name, &cfg)?;
    let (map, summary) = analyze_trap(&cfg.trap, cfg.fit_window)?;
    if cfg.write_psi {
        let meta = art.meta();
        art.write_with("psi.csv", |w| write_psi_csv(w, &map.psi, &meta))?;
        if cli.gnuplot {
            let (x, y) = (map.minimum.x, map.minimum.y);
            art.write_with("plot.gp", |w| {
                write!(
                    w,
                    "set datafile separator \",\"\nset xlabel \"x (m)\"\nset ylabel \"y (m)\"\nset view map\n\
                     set terminal pngcairo size 900,600\nset output \"psi.png\"\n\
                     set label 1 at {x:e},{y:e} \"+\" front center\n\
                     set cbrange [*:{:e}]\nplot \"psi.csv\" using 1:2:3 with image notitle\n",
                    map.minimum.value + 2.0 * map.depth.depth
                )
            })?;
        }
    }
    finish(art, &summary)
}

fn apply_drag(args: &DragArgs, d: &mut config::DragConfig) -> Result<(), CliError> {
    set(&mut d.b, args.b);
    if args.pressure.is_some() {
        d.pressure = args.pressure;
    }
    if args.omega.is_some() {
        d.omega = args.omega;
    }
    apply_ion(&args.ion, &mut d.ion)
}

fn stability(cli: &Cli, mut cfg: StabilityConfig, a: &StabilityArgs) -> Result<(), CliError> {
    set(&mut cfg.a, a.a);
    set(&mut cfg.q, a.q);
    apply_drag(&a.drag, &mut cfg.drag)?;
    let art = Artifacts::create(&cli.out, "stability", &cfg)?;
    let b = cfg.drag.resolve_b()?;
    let p = MathieuParams::new(cfg.a, cfg.q, b);
    let r = is_stable(&p)?;
    let summary = json!({
        "a": p.a,
        "q": p.q,
        "b": p.b,
        "stable": r.stable,
        "floquet_magnitudes": r.floquet_magnitudes,
        "monodromy": r.monodromy,
        "determinant": r.monodromy[0][0] * r.monodromy[1][1] - r.monodromy[0][1] * r.monodromy[1][0],
    });
    finish(art, &summary)
}

fn qmax_cmd(cli: &Cli, mut cfg: QmaxConfig, a: &QmaxArgs) -> Result<(), CliError> {
    set(&mut cfg.a, a.a);
    apply_drag(&a.drag, &mut cfg.drag)?;
    let art = Artifacts::create(&cli.out, "qmax", &cfg)?;
    let b = cfg.drag.resolve_b()?;
    let q = qmax(cfg.a, b)?;
    finish(art, &json!({ "a": cfg.a, "b": b, "qmax": q }))
}

#[derive(Serialize)]
struct ShuttleRow {
    pressure: f64,
    gamma: f64,
    b: Option<f64>,
    t_d: f64,
    exit_velocity: f64,
    c: f64,
    terminal_velocity: f64,
    knudsen: f64,
    reynolds: f64,
}

fn shuttle_row(cfg: &ShuttleConfig, p: f64) -> Result<ShuttleRow, CliError> {
    let gas = GasModel::air(p)?;
    let model = ShuttleModel::from_gas(cfg.e_field, cfg.length, &gas, &cfg.ion)?;
    let s = shuttle_time(&model, &cfg.ion)?;
    let b = cfg.omega.map(|w| drag_b(&gas, &cfg.ion, w)).transpose()?;
    Ok(ShuttleRow {
        pressure: p,
        gamma: model.gamma,
        b,
        t_d: s.t_d,
        exit_velocity: s.exit_velocity,
        c: s.c,
        terminal_velocity: s.terminal_velocity,
        knudsen: gas.knudsen(cfg.ion.radius),
        reynolds: gas.check_reynolds(&cfg.ion, s.exit_velocity),
    })
}

fn shuttle(cli: &Cli, mut cfg: ShuttleConfig, a: &ShuttleArgs) -> Result<(), CliError> {
    set(&mut cfg.e_field, a.e_field);
    set(&mut cfg.length, a.length);
    set(&mut cfg.pressure, a.pressure);
    if !a.pressures.is_empty() {
        cfg.pressures = a.pressures.clone();
    }
    if a.omega.is_some() {
        cfg.omega = a.omega;
    }
    apply_ion(&a.ion, &mut cfg.ion)?;
    let mut art = Artifacts::create(&cli.out, "shuttle", &cfg)?;
    if cfg.pressures.is_empty() {
        let row = shuttle_row(&cfg, cfg.pressure)?;
        return finish(art, &row);
    }
    let rows = cfg.pressures.iter().map(|&p| shuttle_row(&cfg, p)).collect::<Result<Vec<_>, _>>()?;
    let meta = art.meta();
    art.write_with("shuttle.csv", |w| {
        write_meta(w, &meta)?;
        writeln!(w, "pressure_Pa,gamma_per_s,b,t_d_s,exit_velocity_m_per_s,c,terminal_velocity_m_per_s")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt_num(r.pressure),
                fmt_num(r.gamma),
                r.b.map_or("NaN".to_string(), fmt_num),
                fmt_num(r.t_d),
                fmt_num(r.exit_velocity),
                fmt_num(r.c),
                fmt_num(r.terminal_velocity)
            )?;
        }
        Ok(())
    })?;
    if cli.gnuplot {
        art.write_with("plot.gp", |w| {
            write!(
                w,
                "set datafile separator \",\"\nset logscale xy\nset xlabel \"p (Pa)\"\nset terminal pngcairo size 800,600\n\
                 set output \"shuttle.png\"\nplot \"shuttle.csv\" using 1:6 with linespoints title \"c\", \
                 \"shuttle.csv\" using 1:3 with linespoints title \"b\", \
                 \"shuttle.csv\" using 1:5 with linespoints title \"exit velocity (m/s)\"\n"
            )
        })?;
    }
    finish(art, &rows)
}

fn trajectory(cli: &Cli, mut cfg: TrajectoryConfig, a: &TrajectoryArgs) -> Result<(), CliError> {
    apply_trap(&a.trap, &mut cfg.trap)?;
    if a.pressure.is_some() {
        cfg.pressure = a.pressure;
    }
    if a.x0.is_some() || a.y0.is_some() {
        let (x, y) = match (a.x0, a.y0) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(CliError::validation("--x0 and --y0 go together")),
        };
        cfg.start = Some([x, y]);
    }
    set(&mut cfg.periods, a.periods);
    set(&mut cfg.steps_per_period, a.steps_per_period);
    set(&mut cfg.record_every, a.record_every);
    if let Some(p) = &a.waveform {
        cfg.waveform = Some(config::read_waveform(p)?);
    }
    if cfg.periods == 0 || cfg.steps_per_period == 0 || cfg.record_every == 0 {
        return Err(CliError::validation("periods, steps_per_period and record_every must be positive"));
    }
    let mut art = Artifacts::create(&cli.out, "trajectory", &cfg)?;

    let t = &cfg.trap;
    let layout = t.layout()?.build()?;
    let grid = grid_for(&layout, t.spacing)?;
    let drive = t.drive()?;
    let basis = solve_basis(&layout, grid, t.tol)?;
    let start = match cfg.start {
        Some(s) => s,
        None => {
            let field = compose(&basis, &drive.voltages())?;
            let m = analyze(&field, &t.ion, &drive, &AnalysisOptions::for_layout(&layout))?;
            [m.minimum.x, m.minimum.y]
        }
    };
    let wave = match &cfg.waveform {
        Some(w) => Waveform::new(w.segments.clone())?,
        None => Waveform::default(),
    };
    for id in wave.electrodes() {
        if basis.get(id).is_none() {
            return Err(DynamicsError::UnknownElectrode(id.to_string()).into());
        }
    }
    let gas = cfg.pressure.map(GasModel::air).transpose()?;
    let fields = TrapFields::new(&basis);
    let mut run = RunConfig::per_period(drive.omega, cfg.steps_per_period, cfg.periods);
    run.record_every = cfg.record_every;
    let init = [start[0], start[1], cfg.velocity[0], cfg.velocity[1]];
    let traj = integrate_trajectory(&fields, &wave, &drive, &t.ion, gas.as_ref(), init, run)?;

    let meta = art.meta();
    art.write_with("trajectory.csv", |w| write_trajectory_csv(w, &traj, &meta))?;
    if cli.gnuplot {
        art.write_with("plot.gp", |w| {
            write!(
                w,
                "set datafile separator \",\"\nset xlabel \"t (s)\"\nset ylabel \"position (m)\"\n\
                 set terminal pngcairo size 900,600\nset output \"trajectory.png\"\n\
                 plot \"trajectory.csv\" using 1:2 with lines title \"x\", \"trajectory.csv\" using 1:3 with lines title \"y\"\n"
            )
        })?;
    }
    let micromotion = if !traj.escaped && cfg.periods >= MIN_MICROMOTION_PERIODS && cfg.record_every == 1 {
        Some(micromotion_from_trajectory(&traj, drive.omega, 0.0)?)
    } else {
        None
    };
    let last = traj.samples.last().copied();
    let summary = json!({
        "start": start,
        "escaped": traj.escaped,
        "escape_time": traj.escape_time,
        "dt": traj.dt,
        "samples": traj.samples.len(),
        "final": last,
        "micromotion_amplitude": micromotion,
        "grid": grid,
    });
    finish(art, &summary)
}

fn sweep_geometry_cmd(cli: &Cli, mut spec: GeometrySweepSpec, a: &SweepGeometryArgs) -> Result<(), CliError> {
    set(&mut spec.wc_r0, a.wc_r0);
    set(&mut spec.log10_wr_r0, a.log10_wr_r0);
    set(&mut spec.r0_target, a.r0);
    set(&mut spec.v_rf, a.drive.v_rf);
    set(&mut spec.omega, a.drive.omega);
    set(&mut spec.tol, a.tol);
    set(&mut spec.cells_per_r0, a.cells_per_r0);
    apply_ion(&a.ion, &mut spec.ion)?;
    let mut art = Artifacts::create(&cli.out, "sweep-geometry", &spec)?;
    let sweep = sweep_geometry(&spec)?;
    let meta = art.meta();
    art.write_with("geometry.csv", |w| write_geometry_csv(w, &sweep, &meta))?;
    if cli.gnuplot {
        let script = geometry_gnuplot("geometry.csv", spec.log10_wr_r0.points, spec.wc_r0.points);
        art.write_with("plot.gp", |w| w.write_all(script.as_bytes()))?;
    }
    let ok: Vec<_> = sweep.points.iter().filter(|p| p.d0.is_finite()).collect();
    let best = ok.iter().max_by(|x, y| x.d0.total_cmp(&y.d0));
    let mut counts = std::collections::BTreeMap::new();
    for p in &sweep.points {
        *counts.entry(p.status.as_str()).or_insert(0usize) += 1;
    }
    let summary = json!({
        "points": sweep.points.len(),
        "status_counts": counts,
        "max_d0": best.map(|p| json!({ "wc_r0": p.wc_r0, "wr_r0": p.wr_r0, "d0": p.d0, "f_x": p.f_x, "f_y": p.f_y })),
        "scale_check": sweep.scale_check,
    });
    finish(art, &summary)
}

fn sweep_top_plate_cmd(cli: &Cli, mut spec: TopPlateSweepSpec, a: &SweepTopPlateArgs) -> Result<(), CliError> {
    set(&mut spec.wc_r1, a.wc_r1);
    set(&mut spec.wr_r1, a.wr_r1);
    if !a.h_r1.is_empty() {
        spec.h_r1 = a.h_r1.clone();
    }
    set(&mut spec.u, a.u);
    set(&mut spec.r1, a.r1);
    set(&mut spec.v_rf, a.drive.v_rf);
    set(&mut spec.omega, a.drive.omega);
    set(&mut spec.tol, a.tol);
    if a.no_refine {
        spec.refine = false;
    }
    apply_ion(&a.ion, &mut spec.ion)?;
    let mut art = Artifacts::create(&cli.out, "sweep-topplate", &spec)?;
    let sweep = sweep_top_plate(&spec)?;
    let meta = art.meta();
    art.write_with("topplate.csv", |w| write_top_plate_csv(w, &sweep, &meta))?;
    if cli.gnuplot {
        let script = top_plate_gnuplot("topplate.csv", &spec.h_r1);
        art.write_with("plot.gp", |w| w.write_all(script.as_bytes()))?;
    }
    let curves: Vec<_> = sweep
        .curves
        .iter()
        .map(|c| {
            json!({
                "h_r1": c.h_r1,
                "peak": c.peak,
                "enhancement": c.enhancement,
                "transitions": c.transitions,
            })
        })
        .collect();
    finish(art, &json!({ "curves": curves }))
}

#[derive(Serialize)]
struct QmSummary {
    #[serde(flatten)]
    spectrum: QmSpectrum,
    source: &'static str,
}

fn qm(cli: &Cli, mut cfg: QmConfig, a: &QmArgs) -> Result<(), CliError> {
    if let Some(p) = &a.records {
        cfg.records = config::read_records(p)?;
        cfg.synthetic = None;
    }
    if let Some(n) = a.synthetic {
        let base = cfg.synthetic.unwrap_or(SyntheticSpec {
            n,
            mean: 1.17e-8,
            std_dev: 0.49e-8,
            v: 250.0,
            r0: 1e-3,
            seed: 1,
        });
        cfg.synthetic = Some(SyntheticSpec { n, ..base });
        cfg.records.clear();
    }
    if let (Some(seed), Some(s)) = (a.seed, cfg.synthetic.as_mut()) {
        s.seed = seed;
    }
    set(&mut cfg.bin_width, a.bin_width);
    if a.q_max.is_some() {
        cfg.q_max = a.q_max;
    }
    if a.pressure.is_some() {
        cfg.pressure = a.pressure;
    }
    apply_ion(&a.ion, &mut cfg.ion)?;
    let mut art = Artifacts::create(&cli.out, "qm", &cfg)?;

    let fixed = match (cfg.q_max, cfg.pressure) {
        (Some(q), _) => Some(q),
        (None, None) => Some(crate::stability::QMAX_UNDAMPED),
        (None, Some(_)) => None,
    };
    let (records, source) = match (&cfg.synthetic, cfg.records.is_empty()) {
        (Some(s), true) => (synthetic_records(s, fixed.unwrap_or(crate::stability::QMAX_UNDAMPED))?, "synthetic"),
        (None, false) => (cfg.records.clone(), "records"),
        (Some(_), false) => return Err(CliError::validation("give either records or a synthetic spec, not both")),
        (None, true) => return Err(CliError::validation("no ejection records (use --records or --synthetic)")),
    };
    let (spectrum, values) = match fixed {
        Some(q) => {
            let s = qm_spectrum(&records, q, cfg.bin_width)?;
            let v: Vec<f64> = records.iter().map(|r| qm_from_ejection(r, q) * C_PER_KG_TO_E_PER_AMU).collect();
            (s, v)
        }
        None => {
            let gas = GasModel::air(cfg.pressure.expect("checked above"))?;
            let v = records
                .iter()
                .map(|r: &EjectionRecord| {
                    r.validate()?;
                    let q = qmax(0.0, drag_b(&gas, &cfg.ion, r.omega_ej)?)?;
                    Ok(qm_from_ejection(r, q) * C_PER_KG_TO_E_PER_AMU)
                })
                .collect::<Result<Vec<f64>, CliError>>()?;
            (spectrum_from_values(&v, cfg.bin_width)?, v)
        }
    };
    let meta = art.meta();
    art.write_with("qm.csv", |w| {
        write_meta(w, &meta)?;
        writeln!(w, "omega_ej_rad_per_s,v_V,r0_m,qm_e_per_amu")?;
        for (r, v) in records.iter().zip(&values) {
            writeln!(w, "{},{},{},{}", fmt_num(r.omega_ej), fmt_num(r.v), fmt_num(r.r0), fmt_num(*v))?;
        }
        Ok(())
    })?;
    art.write_with("histogram.csv", |w| {
        write_meta(w, &meta)?;
        writeln!(w, "lo_e_per_amu,hi_e_per_amu,count")?;
        for b in &spectrum.bins {
            writeln!(w, "{},{},{}", fmt_num(b.lo), fmt_num(b.hi), b.count)?;
        }
        Ok(())
    })?;
    if cli.gnuplot {
        art.write_with("plot.gp", |w| {
            write!(
                w,
                "set datafile separator \",\"\nset xlabel \"Q/m (e/amu)\"\nset ylabel \"count\"\nset style fill solid 0.5\n\
                 set terminal pngcairo size 800,600\nset output \"qm.png\"\n\
                 plot \"histogram.csv\" using (($1+$2)/2):3:($2-$1) with boxes notitle\n"
            )
        })?;
    }
    finish(art, &QmSummary { spectrum, source })
}

fn design(cli: &Cli, mut spec: DesignSpec, a: &DesignArgs) -> Result<(), CliError> {
    set(&mut spec.v_rf, a.drive.v_rf);
    set(&mut spec.omega, a.drive.omega);
    set(&mut spec.h, a.h);
    set(&mut spec.u_plate, a.u_plate);
    set(&mut spec.tol, a.tol);
    set(&mut spec.periods, a.periods);
    set(&mut spec.steps_per_period, a.steps_per_period);
    let art = Artifacts::create(&cli.out, "design-example", &spec)?;
    let report = design_example(&spec)?;
    finish(art, &report)
}
