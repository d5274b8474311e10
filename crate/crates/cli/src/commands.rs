use std::path::PathBuf;

use jjosc::fidelity::{
    infidelity_curve, IntegrationOptions, PhaseNoiseModel, QubitOperation,
};
use jjosc::injection::{fit_adler_constant, locking_map, InjectionSpec, LockOptions, MapOptions};
use jjosc::sigproc::{fit_peak, trace_spectrum, LineShape, PeakFitOptions, TraceSignal, Window};
use jjosc::steady_state::{
    bias_sweep, max_output_power, optimal_load, required_critical_current, solve_operating_point,
};
use jjosc::time_domain::{
    iv_curve, predicted_start, simulate, steady_state_metrics, BiasNoise, InitialCondition, SimConfig, TimeTrace,
};
use jjosc::{Junction, Resonator};
use serde_json::{json, Value};

use crate::config::{parse_sweep, DeviceConfig};
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::{Command, FitShape, Loaded, SimArgs, Signal, Start, WindowArg};

pub struct Report {
    pub table: Table,
    pub results: Value,
    /// Additional files written alongside the main CSV.
    pub extra: Vec<(PathBuf, String)>,
    /// Whether the seed influenced the output.
    pub seeded: bool,
}

impl Report {
    fn new(table: Table, results: Value) -> Self {
        Self { table, results, extra: Vec::new(), seeded: false }
    }
}

fn device(loaded: &Loaded) -> Result<(&DeviceConfig, Junction, Resonator), CliError> {
    let d = loaded
        .device
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    Ok((d, d.junction(), d.resonator()))
}

fn noise_for(d: &DeviceConfig, temperature: Option<f64>, psd: Option<f64>) -> (f64, Option<BiasNoise>) {
    let t = temperature.unwrap_or(d.environment.temperature_k);
    let psd = psd.or(d.environment.bias_noise_psd_a2_per_hz).filter(|&p| p > 0.0);
    (t, psd.map(|psd| BiasNoise { psd, corner: d.environment.bias_noise_corner_hz }))
}

fn sim_config(d: &DeviceConfig, j: &Junction, r: &Resonator, s: &SimArgs, seed: u64) -> Result<SimConfig, CliError> {
    let (noise_temperature, bias_noise) = noise_for(d, s.temperature, s.bias_noise_psd);
    let initial = match s.initial {
        Start::Zero => InitialCondition::Zero,
        Start::Bare => InitialCondition::ShapiroBare,
        Start::Predicted => match solve_operating_point(j, r, s.ib) {
            Ok(op) => predicted_start(&op),
            Err(_) => InitialCondition::ShapiroBare,
        },
    };
    let injection = match (s.inj_freq, s.inj_power_dbm) {
        (Some(f), Some(p)) => Some(InjectionSpec::new(f, p, s.coupling)?.tone()),
        _ => None,
    };
    let cfg = SimConfig {
        duration: s.duration,
        output_dt: s.output_dt,
        rtol: s.rtol,
        noise_temperature,
        bias_noise,
        seed,
        injection,
        initial,
        transient_fraction: s.transient,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn is_noisy(cfg: &SimConfig) -> bool {
    cfg.noise_temperature > 0.0 || cfg.bias_noise.is_some()
}

fn metrics_json(tr: &TimeTrace) -> Value {
    match steady_state_metrics(tr) {
        Ok(m) => json!({
            "v_dc_v": m.v_dc,
            "f_emit_hz": m.f_emit,
            "i1_a": m.i1,
            "peak_prominence_db": m.peak_prominence_db,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn sim_settings(cfg: &SimConfig) -> Value {
    json!({
        "duration_s": cfg.duration,
        "output_dt_s": cfg.output_dt,
        "rtol": cfg.rtol,
        "atol": cfg.atol,
        "noise_temperature_k": cfg.noise_temperature,
        "bias_noise_psd_a2_per_hz": cfg.bias_noise.map(|b| b.psd),
        "bias_noise_corner_hz": cfg.bias_noise.map(|b| b.corner),
        "shunt_inductance_h": cfg.shunt_inductance,
        "transient_fraction": cfg.transient_fraction,
        "initial": format!("{:?}", cfg.initial),
        "injection": cfg.injection.map(|t| json!({"amplitude_a": t.amplitude, "frequency_hz": t.frequency})),
    })
}

pub fn run(command: &Command, loaded: &Loaded, seed: u64) -> Result<Report, CliError> {
    match command {
        Command::OperatingPoint { ib, .. } => {
            let (_, j, r) = device(loaded)?;
            let op = solve_operating_point(&j, &r, *ib)?;
            let mut t = Table::new(&[
                "ib_a",
                "f_emit_hz",
                "omega_rad_per_s",
                "v_dc_v",
                "i1_a",
                "i1_reduced_rad",
                "ij_dc_a",
                "phic_rad",
                "p_out_w",
                "p_dc_w",
                "efficiency_ratio",
            ]);
            t.push(vec![
                op.ib.into(),
                op.frequency().into(),
                op.omega.into(),
                op.voltage().into(),
                op.i1.into(),
                op.i1_reduced.into(),
                op.ij_dc.into(),
                op.phic.into(),
                op.p_out.into(),
                op.p_dc.into(),
                op.efficiency.into(),
            ]);
            Ok(Report::new(t, json!({ "region": format!("{:?}", op.region) })))
        }
        Command::SweepBias { ib, .. } => {
            let (_, j, r) = device(loaded)?;
            let grid = parse_sweep("ib", ib)?;
            let rows = bias_sweep(&j, &r, &grid)?;
            let mut t = Table::new(&[
                "ib_a",
                "region",
                "f_emit_hz",
                "p_out_w",
                "v_dc_v",
                "i1_a",
                "efficiency_ratio",
                "flag",
            ]);
            let mut step: Option<(f64, f64)> = None;
            for row in &rows {
                if row.point.is_some() {
                    step = Some(step.map_or((row.ib, row.ib), |(a, b)| (a.min(row.ib), b.max(row.ib))));
                }
                t.push(vec![
                    row.ib.into(),
                    format!("{:?}", row.region).into(),
                    row.f_emit.into(),
                    row.p_out.into(),
                    row.v_dc.into(),
                    row.point.map(|p| p.i1).into(),
                    row.point.map(|p| p.efficiency).into(),
                    row.flag.clone().map_or(Cell::Missing, Cell::Text),
                ]);
            }
            Ok(Report::new(t, json!({ "step_ib_a": step.map(|(a, b)| [a, b]) })))
        }
        Command::Iv { ib, duration, output_dt, ramp_fraction, temperature, .. } => {
            let (d, j, r) = device(loaded)?;
            let grid = parse_sweep("ib", ib)?;
            let (noise_temperature, bias_noise) = noise_for(d, *temperature, None);
            let cfg = SimConfig {
                duration: *duration,
                output_dt: *output_dt,
                noise_temperature,
                bias_noise,
                seed,
                ..Default::default()
            };
            let points = iv_curve(&j, &r, &grid, &cfg, *ramp_fraction)?;
            let mut t = Table::new(&["ib_a", "v_mean_v", "drift_ratio", "flag"]);
            for p in &points {
                t.push(vec![
                    p.ib.into(),
                    p.v_mean.into(),
                    p.drift.into(),
                    p.flag.clone().map_or(Cell::Missing, Cell::Text),
                ]);
            }
            let mut rep = Report::new(t, json!({ "simulation": sim_settings(&cfg), "ramp_fraction": ramp_fraction }));
            rep.seeded = is_noisy(&cfg);
            Ok(rep)
        }
        Command::Simulate { sim, decimate, .. } => {
            let (d, j, r) = device(loaded)?;
            if *decimate == 0 {
                return Err(CliError::Config("--decimate: must be >= 1".into()));
            }
            let cfg = sim_config(d, &j, &r, sim, seed)?;
            let tr = simulate(&j, &r, sim.ib, &cfg)?;
            let mut t = Table::new(&["t_s", "phi_rad", "v_v", "i_res_a", "q_res_c", "i_shunt_a"]);
            for (k, s) in tr.samples.iter().enumerate().step_by(*decimate) {
                t.push(vec![
                    tr.time(k).into(),
                    s.phi.into(),
                    s.v.into(),
                    s.i_res.into(),
                    s.q_res.into(),
                    s.i_shunt.into(),
                ]);
            }
            let mut rep = Report::new(
                t,
                json!({
                    "ib_a": sim.ib,
                    "simulation": sim_settings(&cfg),
                    "steady_state": metrics_json(&tr),
                }),
            );
            rep.seeded = is_noisy(&cfg);
            Ok(rep)
        }
        Command::Spectrum { sim, signal, segment, window, band, fit, .. } => {
            let (d, j, r) = device(loaded)?;
            let cfg = sim_config(d, &j, &r, sim, seed)?;
            let tr = simulate(&j, &r, sim.ib, &cfg)?;
            let (which, header) = match signal {
                Signal::Voltage => (TraceSignal::Voltage, "psd_v2_per_hz"),
                Signal::Current => (TraceSignal::ResonatorCurrent, "psd_a2_per_hz"),
                Signal::Power => (TraceSignal::OutputPower, "psd_w_per_hz"),
            };
            let steady = tr.len() - tr.steady_start();
            let seg = if *segment == 0 { steady } else { *segment };
            let win = match window {
                WindowArg::Hann => Window::Hann,
                WindowArg::Rect => Window::Rectangular,
            };
            let s = trace_spectrum(&tr, which, seg, win)?;
            let fit_json = match fit {
                FitShape::None => Value::Null,
                shape => {
                    let shape = if *shape == FitShape::Gaussian { LineShape::Gaussian } else { LineShape::Lorentzian };
                    let f = fit_peak(&s, &PeakFitOptions { shape, ..Default::default() })?;
                    json!({
                        "shape": format!("{shape:?}"),
                        "center_hz": f.center,
                        "fwhm_hz": f.fwhm,
                        "center_sigma_hz": f.center_sigma,
                        "fwhm_sigma_hz": f.fwhm_sigma,
                        "area": f.area,
                        "reduced_chi2": f.reduced_chi2,
                    })
                }
            };
            let (lo, hi) = match band {
                Some(b) => {
                    let parts: Vec<&str> = b.split(':').collect();
                    let nums: Vec<f64> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
                    if parts.len() != 2 || nums.len() != 2 || !(nums[1] > nums[0]) {
                        return Err(CliError::Config(format!("--band `{b}`: expected lo:hi with lo < hi")));
                    }
                    (nums[0], nums[1])
                }
                None => (f64::NEG_INFINITY, f64::INFINITY),
            };
            let mut t = Table::new(&["f_hz", header]);
            for (&f, &p) in s.f.iter().zip(&s.psd) {
                if f >= lo && f <= hi {
                    t.push(vec![f.into(), p.into()]);
                }
            }
            let mut rep = Report::new(
                t,
                json!({
                    "ib_a": sim.ib,
                    "simulation": sim_settings(&cfg),
                    "rbw_hz": s.rbw,
                    "segments": s.segments,
                    "segment_len": seg,
                    "peak_frequency_hz": s.peak_frequency(),
                    "fit": fit_json,
                }),
            );
            rep.seeded = is_noisy(&cfg);
            Ok(rep)
        }
        Command::InjectionMap {
            ib,
            p_inj_dbm,
            coupling,
            f_inj,
            f_offset,
            duration,
            settle,
            output_dt,
            transient,
            threshold,
            temperature,
            spectra,
            ..
        } => {
            let (d, j, r) = device(loaded)?;
            let (noise_temperature, bias_noise) = noise_for(d, *temperature, None);
            let base = SimConfig {
                duration: *duration,
                output_dt: *output_dt,
                noise_temperature,
                bias_noise,
                seed,
                transient_fraction: *transient,
                ..Default::default()
            };
            let initial = match solve_operating_point(&j, &r, *ib) {
                Ok(op) => predicted_start(&op),
                Err(_) => InitialCondition::ShapiroBare,
            };
            let free_cfg = SimConfig { duration: *settle, initial, ..base.clone() };
            let free = simulate(&j, &r, *ib, &free_cfg)?;
            let m = steady_state_metrics(&free)?;
            let start = free.final_state().ok_or_else(|| CliError::Numeric("empty free-running trace".into()))?;
            let grid = match (f_inj, f_offset) {
                (Some(g), _) => parse_sweep("f-inj", g)?,
                (None, Some(g)) => parse_sweep("f-offset", g)?.into_iter().map(|x| m.f_emit + x).collect(),
                (None, None) => return Err(CliError::Config("one of --f-inj or --f-offset is required".into())),
            };
            let spec = InjectionSpec::new(grid[0], *p_inj_dbm, *coupling)?;
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            let pad = (hi - lo).max(1e6);
            let opts = MapOptions {
                lock: LockOptions { threshold: *threshold, segment_len: None },
                band: (lo - pad, hi + pad),
            };
            let map = locking_map(&j, &r, *ib, &grid, &spec, start, &base, &opts)?;
            let mut t = Table::new(&[
                "f_inj_hz",
                "offset_hz",
                "locked",
                "pulled_frequency_hz",
                "sideband_fraction_ratio",
                "flag",
            ]);
            for p in &map.points {
                t.push(vec![
                    p.f_inj.into(),
                    (p.f_inj - m.f_emit).into(),
                    p.lock.map_or(Cell::Missing, |l| l.locked.into()),
                    p.lock.map(|l| l.pulled_frequency).into(),
                    p.lock.map(|l| l.sideband_fraction).into(),
                    p.flag.clone().map_or(Cell::Missing, Cell::Text),
                ]);
            }
            let mut rep = Report::new(
                t,
                json!({
                    "ib_a": ib,
                    "p_inj_dbm": p_inj_dbm,
                    "injected_amplitude_a": spec.amplitude(),
                    "free_running_frequency_hz": m.f_emit,
                    "free_running_i1_a": m.i1,
                    "locked_interval_hz": map.locked_interval.map(|(a, b)| [a, b]),
                    "lock_range_hz": map.lock_range(),
                    "simulation": sim_settings(&base),
                }),
            );
            if let Some(path) = spectra {
                let mut s = Table::new(&["f_inj_hz", "f_hz", "psd_a2_per_hz"]);
                for (a, b, c) in map.rows() {
                    s.push(vec![a.into(), b.into(), c.into()]);
                }
                rep.extra.push((path.clone(), s.to_csv()));
            }
            rep.seeded = is_noisy(&base);
            Ok(rep)
        }
        Command::AdlerFit { input, .. } => {
            let text = std::fs::read_to_string(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
            let data = read_adler_points(&text).map_err(|m| CliError::Config(format!("{}: {m}", input.display())))?;
            let fit = fit_adler_constant(&data)?;
            let mut t = Table::new(&["p_inj_w", "lock_range_hz", "fit_lock_range_hz"]);
            for &(p, w) in &data {
                t.push(vec![p.into(), w.into(), (fit.k * p.sqrt()).into()]);
            }
            Ok(Report::new(t, json!({ "k_hz_per_sqrt_w": fit.k, "r2": fit.r2, "points": data.len() })))
        }
        Command::Fidelity { anchors, tau, ops, clip_above, f_min, f_max, rel_tol, .. } => {
            let points = parse_anchors(anchors)?;
            let mut model = PhaseNoiseModel::from_points(&points).map_err(|e| CliError::Config(format!("--anchors: {e}")))?;
            if let Some(c) = clip_above {
                model = model.with_clip_above(*c);
            }
            let taus = parse_sweep("tau", tau)?;
            let ops = parse_ops(ops)?;
            let opts = IntegrationOptions { f_min: *f_min, f_max: *f_max, rel_tol: *rel_tol, ..Default::default() };
            let mut t = Table::new(&["tau_s", "operation", "x_rad2", "infidelity_ratio"]);
            for op in ops {
                for p in infidelity_curve(&model, op, &taus, &opts)? {
                    t.push(vec![p.tau.into(), op.label().into(), p.x.into(), p.infidelity.into()]);
                }
            }
            Ok(Report::new(
                t,
                json!({
                    "anchors_hz_dbc_per_hz": points,
                    "clip_above_hz": clip_above,
                    "f_min_hz": f_min,
                    "f_max_hz": f_max,
                    "rel_tol": rel_tol,
                }),
            ))
        }
        Command::DesignOptimize { target_power, freq, cs, .. } => {
            let cs = match (cs, &loaded.device) {
                (Some(c), _) => *c,
                (None, Some(d)) => d.junction.cs_f,
                (None, None) => return Err(CliError::Config("--cs or --config is required".into())),
            };
            if !(*target_power > 0.0) || !(*freq > 0.0) || !(cs > 0.0) {
                return Err(CliError::Config("--target-power, --freq and cs must be > 0".into()));
            }
            let omega = 2.0 * std::f64::consts::PI * freq;
            let ic = required_critical_current(*target_power, omega);
            let r1 = optimal_load(ic, cs, omega);
            let mut t = Table::new(&[
                "target_power_w",
                "frequency_hz",
                "required_ic_a",
                "cs_f",
                "optimal_r1_ohm",
                "max_power_w",
            ]);
            t.push(vec![
                (*target_power).into(),
                (*freq).into(),
                ic.into(),
                cs.into(),
                r1.into(),
                max_output_power(ic, omega).into(),
            ]);
            Ok(Report::new(t, Value::Null))
        }
        Command::Rerun { .. } => unreachable!("handled before dispatch"),
    }
}

fn parse_anchors(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let bad = || CliError::Config(format!("--anchors: `{pair}` is not f:L"));
            let (f, l) = pair.split_once(':').ok_or_else(bad)?;
            Ok((f.trim().parse().map_err(|_| bad())?, l.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn parse_ops(text: &str) -> Result<Vec<QubitOperation>, CliError> {
    text.split(',')
        .map(|s| {
            QubitOperation::ALL
                .into_iter()
                .find(|op| op.label() == s.trim())
                .ok_or_else(|| CliError::Config(format!("--ops: unknown operation `{s}`")))
        })
        .collect()
}

fn read_adler_points(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("empty file")?.split(',').map(str::trim).collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let width = col("lock_range_hz").ok_or("missing column lock_range_hz")?;
    let (pcol, in_dbm) = match (col("p_inj_w"), col("p_inj_dbm")) {
        (Some(c), _) => (c, false),
        (None, Some(c)) => (c, true),
        _ => return Err("missing column p_inj_w or p_inj_dbm".into()),
    };
    lines
        .enumerate()
        .map(|(k, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |c: usize| -> Result<f64, String> {
                cells
                    .get(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| format!("row {}: column {} is not a number", k + 2, header[c]))
            };
            let p = num(pcol)?;
            let p = if in_dbm { jjosc::injection::dbm_to_watts(p) } else { p };
            Ok((p, num(width)?))
        })
        .collect()
}
