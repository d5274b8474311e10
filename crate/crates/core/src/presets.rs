//! Reference devices: the nominal spiral-resonator sample, its version with
//! parameters fitted to the measured operating point, and a low-impedance
//! reference resonator for frequency-sensitivity comparisons.

use serde::{Deserialize, Serialize};

use crate::circuit_model::{shapiro_voltage, JunctionParams};
use crate::error::Result;
use crate::roots::{brent, RootOptions};
use crate::steady_state::{optimal_load, solve_operating_point, step_edges, ResonatorParams};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub const SPIRAL_IC: f64 = 10e-6;
pub const SPIRAL_CS: f64 = 192e-12;
pub const SPIRAL_L1: f64 = 2.0e-9;
pub const SPIRAL_C1: f64 = 0.36e-12;
pub const SPIRAL_RS: f64 = 1.0;
/// Design frequency used for the optimal load.
pub const SPIRAL_DESIGN_FREQUENCY: f64 = 5.35e9;

/// Measured emission frequency at the injection-locking bias.
pub const TARGET_FREQUENCY: f64 = 5.34745e9;
pub const TARGET_FREQUENCY_BIAS: f64 = 16.5e-6;
/// Upper edge of the measured emission region.
pub const TARGET_STEP_TOP: f64 = 18e-6;
pub const TARGET_PEAK_POWER: f64 = 28e-12;
pub const TARGET_PEAK_BIAS: f64 = 17.7e-6;

pub const REFERENCE_IC: f64 = 1.8e-6;
pub const REFERENCE_Z0: f64 = 3.8;

pub fn spiral_junction() -> JunctionParams<f64> {
    JunctionParams { ic: SPIRAL_IC, cs: SPIRAL_CS, rs: SPIRAL_RS }
}

/// Spiral resonator loaded at the optimal series loss, no parasitic
/// inductance, `qt = qe`.
pub fn spiral_nominal() -> (JunctionParams<f64>, ResonatorParams<f64>) {
    let r1 = optimal_load(SPIRAL_IC, SPIRAL_CS, TWO_PI * SPIRAL_DESIGN_FREQUENCY);
    let r = ResonatorParams::from_circuit(SPIRAL_L1, SPIRAL_C1, r1, 0.0).expect("valid preset");
    (spiral_junction(), r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedDevice {
    pub junction: JunctionParams<f64>,
    pub resonator: ResonatorParams<f64>,
    /// Upper step edge reached by the fit (A).
    pub step_top: f64,
    /// Emission frequency at `TARGET_FREQUENCY_BIAS`.
    pub frequency: f64,
    /// Delivered power at `TARGET_PEAK_BIAS`.
    pub peak_power: f64,
}

/// Fits `rs`, `lp` and `qt/qe` of the spiral device so that the step ends at
/// 18 µA, the emission at 16.5 µA sits at 5.34745 GHz and 28 pW are
/// delivered at 17.7 µA. `rs` and `lp` are coupled and refined alternately.
pub fn fit_spiral_device() -> Result<FittedDevice> {
    let (mut j, mut r) = spiral_nominal();
    let opts = RootOptions { xtol: 0.0, rtol: 1e-12, max_iter: 200 };
    for _ in 0..4 {
        let lp = brent(
            |lp| {
                let rr = ResonatorParams { lp, ..r };
                solve_operating_point(&j, &rr, TARGET_FREQUENCY_BIAS)
                    .map(|op| op.frequency() - TARGET_FREQUENCY)
                    .unwrap_or(f64::NAN)
            },
            0.0,
            0.6e-9,
            opts,
        )?;
        r.lp = lp;
        // On the step `<I_J>` rises with bias; the top edge is where it reaches
        // the locking bound, so it moves as `rs` changes the DC split.
        let rs = brent(
            |rs| {
                let jj = JunctionParams { rs, ..j };
                let v = shapiro_voltage(r.bare_omega());
                let lo = j.ic.max(v / rs);
                match step_edges(&jj, &r, lo, 30e-6, 60, 1e-10) {
                    Some((_, top)) => top - TARGET_STEP_TOP,
                    None => f64::NAN,
                }
            },
            0.8,
            1.0,
            RootOptions { xtol: 1e-9, rtol: 1e-9, max_iter: 100 },
        )?;
        j.rs = rs;
    }
    let op = solve_operating_point(&j, &r, TARGET_PEAK_BIAS)?;
    let eta = TARGET_PEAK_POWER / (op.p_out * r.qe / r.qt);
    r = r.with_eta_mw(eta)?;
    let step_top = step_edges(&j, &r, j.ic, 30e-6, 60, 1e-10).map(|e| e.1).unwrap_or(f64::NAN);
    Ok(FittedDevice {
        junction: j,
        resonator: r,
        step_top,
        frequency: solve_operating_point(&j, &r, TARGET_FREQUENCY_BIAS)?.frequency(),
        peak_power: solve_operating_point(&j, &r, TARGET_PEAK_BIAS)?.p_out,
    })
}

/// Low-impedance resonator (`Z0 = 3.8 Ω`) at the same frequency with a
/// 1.8 µA junction, loaded at its optimal series loss.
pub fn reference_device(rs: f64) -> (JunctionParams<f64>, ResonatorParams<f64>) {
    let w0 = TWO_PI * SPIRAL_DESIGN_FREQUENCY;
    let r1 = optimal_load(REFERENCE_IC, SPIRAL_CS, w0);
    let r = ResonatorParams::from_circuit(REFERENCE_Z0 / w0, 1.0 / (REFERENCE_Z0 * w0), r1, 0.0).expect("valid preset");
    (JunctionParams { ic: REFERENCE_IC, cs: SPIRAL_CS, rs }, r)
}

/// Copy of a device with capacitance and critical current divided by
/// `factor` and the shunt resistance multiplied by it. The plasma frequency
/// and the Shapiro-step position are unchanged while the optimal load grows
/// by `factor`, so the loaded quality factor drops by `factor`.
pub fn scaled_device(
    j: &JunctionParams<f64>,
    r: &ResonatorParams<f64>,
    factor: f64,
) -> Result<(JunctionParams<f64>, ResonatorParams<f64>)> {
    let jj = JunctionParams::new(j.ic / factor, j.cs / factor, j.rs * factor)?;
    let r1 = optimal_load(jj.ic, jj.cs, TWO_PI * SPIRAL_DESIGN_FREQUENCY);
    let rr = ResonatorParams::from_circuit(r.l1, r.c1, r1, r.lp)?.with_eta_mw(r.eta_mw())?;
    Ok((jj, rr))
}
