//! End-to-end acceptance checks. Run with `cargo test --test acceptance`;
//! prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::f64::consts::PI;
use std::time::Instant;

use jjosc::bessel::{bessel_j, j1_max};
use jjosc::circuit_model::{junction_impedance, JunctionParams};
use jjosc::constants::{flux_quantum, PhysicalConstants};
use jjosc::fidelity::*;
use jjosc::injection::*;
use jjosc::presets::*;
use jjosc::sigproc::*;
use jjosc::steady_state::*;
use jjosc::time_domain::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const TWO_PI: f64 = 2.0 * PI;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn failed(e: impl std::fmt::Display) -> Outcome {
    check(false, format!("error: {e}"))
}

fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

fn oracle_equivalence(d: &FittedDevice) -> Outcome {
    let (j, r) = (&d.junction, &d.resonator);
    let Some((lo, hi)) = step_edges(j, r, j.ic, 25e-6, 60, 1e-9) else {
        return check(false, "no step found");
    };
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for frac in [0.25, 0.5, 0.75] {
        let ib = lo + frac * (hi - lo);
        let op = match solve_operating_point(j, r, ib) {
            Ok(op) => op,
            Err(e) => return failed(e),
        };
        let cfg = SimConfig { duration: 1.5e-6, initial: predicted_start(&op), ..Default::default() };
        let m = match simulate(j, r, ib, &cfg).and_then(|tr| steady_state_metrics(&tr)) {
            Ok(m) => m,
            Err(e) => return failed(e),
        };
        worst.0 = worst.0.max((m.f_emit / op.frequency() - 1.0).abs());
        worst.1 = worst.1.max((m.i1 / op.i1 - 1.0).abs());
        worst.2 = worst.2.max((m.v_dc / (flux_quantum::<f64>() * m.f_emit) - 1.0).abs());
    }
    check(
        worst.0 < 0.01 && worst.1 < 0.10 && worst.2 < 1e-3,
        format!(
            "max |df/f| = {:.2e}, max |dI1/I1| = {:.2e}, max |v/(Phi0 f) - 1| = {:.2e}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn step_window(d: &FittedDevice) -> Outcome {
    let (j, r) = (&d.junction, &d.resonator);
    let ib = grid(0.0, 25e-6, 0.1e-6);
    let rows = match bias_sweep(j, r, &ib) {
        Ok(rows) => rows,
        Err(e) => return failed(e),
    };
    let locked: Vec<f64> = rows.iter().filter(|w| w.region == BiasRegion::ShapiroStep).map(|w| w.ib).collect();
    let (Some(&a), Some(&b)) = (locked.first(), locked.last()) else {
        return check(false, "no locked bias");
    };
    let contiguous = rows
        .iter()
        .filter(|w| w.ib >= a && w.ib <= b)
        .all(|w| w.region == BiasRegion::ShapiroStep);
    let outside_silent = rows
        .iter()
        .filter(|w| w.ib < a || w.ib > b)
        .all(|w| w.f_emit.is_none() && w.p_out.is_none());
    // the oracle agrees: whatever line survives in regions I and III carries
    // less than 1e-5 of the step power
    let quiet = SimConfig { duration: 0.5e-6, initial: InitialCondition::Zero, ..Default::default() };
    let mut stray = Vec::new();
    for ib in [0.5 * j.ic, 22e-6] {
        match simulate(j, r, ib, &quiet).and_then(|tr| steady_state_metrics(&tr)) {
            Ok(m) => stray.push(0.5 * r.r1 * m.i1 * m.i1 * r.qt / r.qe),
            Err(jjosc::Error::NoPeak { .. }) => stray.push(0.0),
            Err(e) => return failed(e),
        }
    }
    let oracle_silent = stray.iter().all(|&p| p < 1e-5 * TARGET_PEAK_POWER);
    let within = a >= 10e-6 - 1e-12 && b <= 19e-6 + 1e-12;
    let overlaps = a < 18e-6 && b > 13e-6;
    check(
        within && overlaps && contiguous && outside_silent && oracle_silent,
        format!(
            "locked [{:.1}, {:.1}] uA, contiguous {contiguous}, silent outside {outside_silent}, oracle stray power at {:.0} / 22 uA: {:.1e} / {:.1e} W",
            a * 1e6,
            b * 1e6,
            0.5 * j.ic * 1e6,
            stray[0],
            stray[1]
        ),
    )
}

fn power_and_efficiency(d: &FittedDevice) -> Outcome {
    let (j, r) = (&d.junction, &d.resonator);
    let rows = match bias_sweep(j, r, &grid(10e-6, 19e-6, 0.05e-6)) {
        Ok(rows) => rows,
        Err(e) => return failed(e),
    };
    let step: Vec<&OperatingPoint<f64>> = rows.iter().filter_map(|w| w.point.as_ref()).collect();
    if step.len() < 5 {
        return check(false, "too few step points");
    }
    let peak = step.iter().max_by(|a, b| a.p_out.total_cmp(&b.p_out)).unwrap();
    let at = match solve_operating_point(j, r, TARGET_PEAK_BIAS) {
        Ok(op) => op,
        Err(e) => return failed(e),
    };
    let p_dc = TARGET_PEAK_BIAS * flux_quantum::<f64>() * at.frequency();
    let eff = at.p_out / p_dc;
    let ib: Vec<f64> = step.iter().map(|p| p.ib).collect();
    let p: Vec<f64> = step.iter().map(|p| p.p_out).collect();
    let r2 = linear_r2(&ib, &p);
    check(
        (at.p_out / 28e-12 - 1.0).abs() <= 0.2
            && (peak.ib - TARGET_PEAK_BIAS).abs() <= 0.5e-6
            && (p_dc / 189e-12 - 1.0).abs() <= 0.05
            && (eff - 0.15).abs() <= 0.03
            && r2 >= 0.95,
        format!(
            "P_out(17.7 uA) = {:.2} pW, step peak {:.2} pW at {:.2} uA, P_DC = {:.1} pW, eff = {:.1}%, R2 = {:.4}",
            at.p_out * 1e12,
            peak.p_out * 1e12,
            peak.ib * 1e6,
            p_dc * 1e12,
            eff * 100.0,
            r2
        ),
    )
}

fn design_formulas() -> Outcome {
    let (x, jm) = j1_max::<f64>();
    let p = max_output_power(SPIRAL_IC, TWO_PI * SPIRAL_DESIGN_FREQUENCY);
    let (_, r) = spiral_nominal();
    let z0 = r.characteristic_impedance();
    // independent: P = J1max * Ic * Phi0 f at the optimal load
    let oracle = 0.581_865 * SPIRAL_IC * flux_quantum::<f64>() * SPIRAL_DESIGN_FREQUENCY;
    check(
        (jm - 0.5819).abs() <= 1e-4
            && (p / oracle - 1.0).abs() < 1e-4
            && (p * 1e12 - 64.0).abs() < 1.0
            && (z0 - 74.5).abs() < 0.1,
        format!("max|J1| = {jm:.5} at x = {x:.4}, P_max = {:.2} pW, Z0 = {z0:.2} ohm", p * 1e12),
    )
}

fn pulling_and_sensitivity(d: &FittedDevice) -> Outcome {
    let (j, r) = (&d.junction, &d.resonator);
    let Some((lo, hi)) = step_edges(j, r, j.ic, 25e-6, 60, 1e-9) else {
        return check(false, "no step found");
    };
    let ib: Vec<f64> = (0..=40).map(|k| lo + (hi - lo) * (0.01 + 0.98 * k as f64 / 40.0)).collect();
    let f: Vec<f64> = match ib.iter().map(|&b| solve_operating_point(j, r, b).map(|o| o.frequency())).collect() {
        Ok(f) => f,
        Err(e) => return failed(e),
    };
    let increasing = f.windows(2).all(|w| w[1] > w[0]);
    let s_dev = match frequency_sensitivity(j, r, TARGET_FREQUENCY_BIAS) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    let (jr, rr) = reference_device(j.rs);
    let Some((a, b)) = step_edges(&jr, &rr, jr.ic, 10.0 * jr.ic, 200, 1e-11) else {
        return check(false, "reference device has no step");
    };
    let s_ref = match frequency_sensitivity(&jr, &rr, 0.5 * (a + b)) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    let ratio = s_ref.abs() / s_dev.abs();
    check(
        increasing && ratio >= 10.0,
        format!(
            "f strictly increasing over {:.2}-{:.2} uA: {increasing}; df/dIb = {:.3} kHz/nA vs reference {:.3} kHz/nA ({ratio:.1}x)",
            lo * 1e6,
            hi * 1e6,
            s_dev * 1e-12,
            s_ref * 1e-12
        ),
    )
}

fn injection_locking(d: &FittedDevice) -> Outcome {
    let (j, r) = match scaled_device(&d.junction, &d.resonator, 30.0) {
        Ok(v) => v,
        Err(e) => return failed(e),
    };
    let Some((lo, hi)) = step_edges(&j, &r, j.ic, 40e-6 / 30.0, 80, 1e-12) else {
        return check(false, "scaled device has no step");
    };
    let ib = 0.5 * (lo + hi);
    let op = match solve_operating_point(&j, &r, ib) {
        Ok(op) => op,
        Err(e) => return failed(e),
    };
    let q = r.characteristic_impedance() / r.r1;
    let cfg = SimConfig { duration: 40.0 * q / op.frequency(), output_dt: 20e-12, initial: predicted_start(&op), ..Default::default() };
    let free = match simulate(&j, &r, ib, &cfg) {
        Ok(t) => t,
        Err(e) => return failed(e),
    };
    let (m, start) = match (steady_state_metrics(&free), free.final_state()) {
        (Ok(m), Some(s)) => (m, s),
        (Err(e), _) => return failed(e),
        (_, None) => return check(false, "empty trace"),
    };
    let base = SimConfig { output_dt: 20e-12, ..Default::default() };
    let rel_db = [0.0, -6.0, -12.0, -18.0, -20.0];
    let mut data = Vec::new();
    let mut ranges = Vec::new();
    for db in rel_db {
        let amplitude = 0.03 * m.i1 * 10f64.powf(db / 20.0);
        let est = series_injection_lock_range(m.f_emit, amplitude, m.i1, r.c1, j.cs);
        let lr = match lock_range_scan(&j, &r, ib, amplitude, m.f_emit, est, start, &base, &LockScanOptions::default()) {
            Ok(lr) => lr,
            Err(e) => return failed(e),
        };
        let p = (amplitude / DEFAULT_COUPLING).powi(2);
        data.push((p, lr.width()));
        ranges.push(lr);
    }
    let fit = match fit_adler_constant(&data) {
        Ok(f) => f,
        Err(e) => return failed(e),
    };
    let ratios: Vec<f64> = (0..3).map(|k| data[k].1 / data[k + 1].1).collect();
    let doubling = ratios.iter().all(|x| (x - 2.0).abs() <= 0.1);

    // emission sits on the injection tone inside the lock range
    let lr = ranges[0];
    let f_inj = lr.center() + 0.25 * lr.width();
    let amplitude = 0.03 * m.i1;
    let tr = simulate(
        &j,
        &r,
        ib,
        &SimConfig {
            duration: 8.0 / lr.width(),
            injection: Some(jjosc::time_domain::InjectionTone { amplitude, frequency: f_inj }),
            initial: InitialCondition::State(start),
            transient_fraction: 0.5,
            ..base.clone()
        },
    );
    let (bin_ok, offset, bin) = match tr.and_then(|t| {
        let lock = detect_lock(&t, f_inj, &LockOptions::default())?;
        let n = t.len() - t.steady_start();
        Ok((lock, t.sample_rate() / n as f64))
    }) {
        Ok((lock, df)) => (lock.locked && (lock.pulled_frequency - f_inj).abs() < df, lock.pulled_frequency - f_inj, df),
        Err(e) => return failed(e),
    };
    check(
        fit.r2 >= 0.99 && doubling && bin_ok,
        format!(
            "k = {:.4e} Hz/sqrt(W), R2 = {:.5} over 20 dB, +6 dB ratios {:?}, locked emission offset {:.1} Hz (bin {:.1} kHz)",
            fit.k,
            fit.r2,
            ratios.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            offset,
            bin * 1e-3
        ),
    )
}

fn decaying_model(f_knee: f64) -> PhaseNoiseModel<f64> {
    // -30 dB/decade to the knee, -40 dB/decade beyond, last anchor at f_max
    let l_knee = -60.0 - 30.0 * (f_knee / 0.1).log10();
    let l_hi = l_knee - 40.0 * (1e9 / f_knee).log10();
    PhaseNoiseModel::from_points(&[(0.1, -60.0), (f_knee, l_knee), (1e9, l_hi)]).expect("valid anchors")
}

fn fidelity_pipeline() -> Outcome {
    let m = match PhaseNoiseModel::from_points(&measured_anchor_points()) {
        Ok(m) => m,
        Err(e) => return failed(e),
    };
    let opts = IntegrationOptions::default();
    let mut at_10ms = Vec::new();
    for op in QubitOperation::ALL {
        match dephasing_integral(&m, op, 10e-3, &opts) {
            Ok(x) => at_10ms.push(infidelity(x)),
            Err(e) => return failed(e),
        }
    }
    let in_band = at_10ms.iter().all(|&v| v >= 1e-3 / 5.0 && v <= 1e-3 * 5.0);
    let mut vanishing = true;
    for op in QubitOperation::ALL {
        let taus = [1e-9, 1e-10, 1e-11, 1e-12, 1e-13];
        let curve = match infidelity_curve(&m, op, &taus, &opts) {
            Ok(c) => c,
            Err(e) => return failed(e),
        };
        vanishing &= curve.windows(2).all(|w| w[1].infidelity < w[0].infidelity) && curve[4].infidelity < 1e-9;
    }
    let taus: Vec<f64> = (0..=24).map(|k| 10f64.powf(-8.0 + 0.25 * k as f64)).collect();
    let mut echo_ok = true;
    for knee in [1e3, 1e5] {
        let dm = decaying_model(knee);
        let (Ok(r), Ok(e)) = (
            infidelity_curve(&dm, QubitOperation::Ramsey, &taus, &opts),
            infidelity_curve(&dm, QubitOperation::HahnEcho, &taus, &opts),
        ) else {
            return check(false, "decaying model integration failed");
        };
        echo_ok &= r.iter().zip(&e).all(|(a, b)| b.infidelity <= a.infidelity);
    }
    check(
        in_band && vanishing && echo_ok,
        format!(
            "1-F at 10 ms: ramsey {:.3e}, echo {:.3e}, NOT {:.3e}; tau->0 vanishes {vanishing}; echo <= ramsey on decaying models over 1e-8..1 s {echo_ok}",
            at_10ms[0], at_10ms[1], at_10ms[2]
        ),
    )
}

fn noisy_trace(d: &FittedDevice, ib: f64, psd: f64) -> jjosc::Result<TimeTrace> {
    let op = solve_operating_point(&d.junction, &d.resonator, ib)?;
    let cfg = SimConfig {
        duration: 10e-6,
        output_dt: 20e-12,
        bias_noise: Some(BiasNoise { psd, corner: 1e6 }),
        seed: 1,
        initial: predicted_start(&op),
        transient_fraction: 0.2,
        ..Default::default()
    };
    simulate(&d.junction, &d.resonator, ib, &cfg)
}

fn demodulated(tr: &TimeTrace, f_emit: f64) -> jjosc::Result<IqCloud> {
    let x: Vec<f64> = tr.samples[tr.steady_start()..].iter().map(|s| s.i_res).collect();
    heterodyne_demodulate(&x, tr.sample_rate(), f_emit - 50e6, 50)
}

fn linewidth_substitutes(d: &FittedDevice) -> Outcome {
    let ib = 14.5e-6;
    let f_emit = match solve_operating_point(&d.junction, &d.resonator, ib) {
        Ok(op) => op.frequency(),
        Err(e) => return failed(e),
    };
    let psds = [1e-19, 1e-20, 1e-21];
    let mut widths = Vec::new();
    let mut ring = None;
    for psd in psds {
        let res = noisy_trace(d, ib, psd).and_then(|tr| demodulated(&tr, f_emit));
        match res.and_then(|c| Ok((phase_diffusion_linewidth(&c, 1000)?, c))) {
            Ok((lw, c)) => {
                widths.push(lw);
                if psd == 1e-20 {
                    ring = Some(c);
                }
            }
            Err(e) => return failed(e),
        }
    }
    let monotone = widths.windows(2).all(|w| w[1] < w[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let nrm = Normal::new(0.0, 0.02).expect("finite sigma");
    let sigma = 4.1e3 / (8.0 * std::f64::consts::LN_2).sqrt();
    let f: Vec<f64> = (0..4001).map(|k| 5.347e9 - 200e3 + 100.0 * k as f64).collect();
    let psd: Vec<f64> = f
        .iter()
        .map(|&x| {
            let z = (x - 5.347e9) / sigma;
            (1e-14 * (-0.5 * z * z).exp() + 1e-18) * (1.0 + nrm.sample(&mut rng))
        })
        .collect();
    let fit = fit_gaussian_peak(&Spectrum { f, psd, rbw: 150.0, segments: 1 });
    let (fit_ok, fwhm) = match fit {
        Ok(p) => ((p.fwhm - 4.1e3).abs() <= 100.0, p.fwhm),
        Err(e) => return failed(e),
    };

    let cloud = ring.expect("psd 1e-20 run present");
    let profile = match iq_histogram(&cloud, 200) {
        Ok(h) => radial_profile(&h),
        Err(e) => return failed(e),
    };
    let ring_ok = profile.mean() > 3.0 * profile.std_dev();
    check(
        monotone && fit_ok && ring_ok,
        format!(
            "(a) linewidth vs PSD {psds:?}: {:?} Hz; (b) fitted FWHM {:.1} Hz; (c) ring mean/sigma = {:.1}",
            widths.iter().map(|w| w.round()).collect::<Vec<_>>(),
            fwhm,
            profile.mean() / profile.std_dev()
        ),
    )
}

fn numerical_hygiene(d: &FittedDevice, suite_start: Instant) -> Outcome {
    let mut failures = Vec::new();
    let mut run = |name: &str, res: Result<(), String>| {
        if let Err(e) = res {
            failures.push(format!("{name}: {e}"));
        }
    };
    let cfg = || Config { cases: 64, failure_persistence: None, ..Config::default() };
    let c = PhysicalConstants::<f64>::codata2018();

    let mut runner = TestRunner::new(cfg());
    run(
        "power identity",
        runner
            .run(&(1e-7..1e-4f64, 1e-12..1e-9f64, 1e9..2e10f64, 0.05..3.5f64, 0.01..1.0f64), |(ic, cs, f, x, frac)| {
                let j = JunctionParams::new(ic, cs, 1.0).unwrap();
                let w = TWO_PI * f;
                let i1 = x * c.phi0 * w * w * cs / TWO_PI;
                let ij = frac * ic * bessel_j(1, x).abs();
                let z = junction_impedance(&j, w, i1, ij).unwrap();
                let lhs = -z.re * i1 * i1 / 2.0;
                let rhs = c.hbar * w * ij / (2.0 * c.e);
                prop_assert!((lhs / rhs - 1.0).abs() < 1e-10);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let (j, r) = (d.junction, d.resonator);
    let mut runner = TestRunner::new(cfg());
    run(
        "locking bound",
        runner
            .run(&(10e-6..25e-6f64), |ib| {
                if let Ok(op) = solve_operating_point(&j, &r, ib) {
                    prop_assert!(op.ij_dc.abs() <= j.ic * bessel_j(1, op.i1_reduced).abs() * (1.0 + 1e-12));
                    prop_assert!(op.phic.abs() <= PI / 2.0);
                    prop_assert!((op.p_dc - ib * op.voltage()).abs() <= 1e-9 * op.p_dc);
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(cfg());
    run(
        "parseval",
        runner
            .run(&(any::<u64>(), 0.1..10.0f64, 8usize..13), |(seed, sd, log_n)| {
                let n = 1usize << log_n;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let nrm = Normal::new(0.0, sd).unwrap();
                let x: Vec<f64> = (0..n).map(|_| nrm.sample(&mut rng)).collect();
                let mean = x.iter().sum::<f64>() / n as f64;
                let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let s = power_spectral_density(&x, 1e3, n, Window::Rectangular).unwrap();
                let p = s.psd.iter().sum::<f64>() * s.df();
                prop_assert!((p / var - 1.0).abs() < 1e-9);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(cfg());
    run(
        "filter slopes",
        runner
            .run(&(-9.0..0.0f64), |lt| {
                let tau = 10f64.powf(lt);
                let slope = |op| {
                    let (f1, f2) = (1e-4 / tau, 1e-3 / tau);
                    (filter_function(op, f2, tau) / filter_function(op, f1, tau)).log10()
                };
                prop_assert!((slope(QubitOperation::Ramsey) - 2.0).abs() < 0.05);
                prop_assert!((slope(QubitOperation::HahnEcho) - 4.0).abs() < 0.05);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let anchors = PhaseNoiseModel::from_points(&measured_anchor_points()).expect("valid anchors");
    let mut runner = TestRunner::new(Config { cases: 24, ..cfg() });
    run(
        "+10 dB linearity",
        runner
            .run(&(-7.0..-1.0f64, 0usize..3, -20.0..20.0f64), |(lt, k, shift)| {
                let tau = 10f64.powf(lt);
                let op = QubitOperation::ALL[k];
                let opts = IntegrationOptions::default();
                let m = anchors.shifted(shift);
                let a = dephasing_integral(&m, op, tau, &opts).unwrap();
                let b = dephasing_integral(&m.shifted(10.0), op, tau, &opts).unwrap();
                prop_assert!((b / a / 10.0 - 1.0).abs() < 1e-9);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let elapsed = suite_start.elapsed().as_secs_f64();
    check(
        failures.is_empty() && elapsed < 600.0,
        if failures.is_empty() {
            format!("5 invariant families x randomized cases passed; acceptance runtime {elapsed:.0} s")
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let start = Instant::now();
    let device = fit_spiral_device().expect("device fit");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("analytic-oracle equivalence", Box::new(|| oracle_equivalence(&device))),
        ("Shapiro-step window", Box::new(|| step_window(&device))),
        ("power and efficiency", Box::new(|| power_and_efficiency(&device))),
        ("design formulas", Box::new(design_formulas)),
        ("frequency pulling and sensitivity", Box::new(|| pulling_and_sensitivity(&device))),
        ("injection locking", Box::new(|| injection_locking(&device))),
        ("fidelity pipeline", Box::new(fidelity_pipeline)),
        ("linewidth substitutes", Box::new(|| linewidth_substitutes(&device))),
        ("numerical hygiene", Box::new(|| numerical_hygiene(&device, start))),
    ];
    let mut all = true;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        all &= o.pass;
        println!(
            "criterion {} [{}] {name} ({:.1} s): {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if !all {
        std::process::exit(1);
    }
}
