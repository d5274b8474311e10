//! Self-consistent sustained oscillation of the junction-resonator loop and
//! the design quantities derived from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::j1_max;
use crate::circuit_model::{
    dc_junction_current, junction_impedance, locking_phase, non_negative, positive, reduced_drive,
    shapiro_voltage, ComplexImpedance, JunctionParams,
};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::roots::{brent, RootOptions};
use crate::scalar::Real;

/// Equivalent series resonator seen by the junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams<T> {
    pub l1: T,
    pub c1: T,
    pub r1: T,
    /// Parasitic series inductance (bond wires).
    pub lp: T,
    /// Total quality factor excluding the junction.
    pub qt: T,
    /// External (loaded) quality factor.
    pub qe: T,
}

impl<T: Real> ResonatorParams<T> {
    pub fn new(l1: T, c1: T, r1: T, lp: T, qt: T, qe: T) -> Result<Self> {
        let r = Self { l1, c1, r1, lp, qt, qe };
        r.validate()?;
        Ok(r)
    }

    /// Resonator with `qe = sqrt(l1/c1)/r1` and lossless coupling (`qt = qe`).
    pub fn from_circuit(l1: T, c1: T, r1: T, lp: T) -> Result<Self> {
        positive("l1", l1)?;
        positive("c1", c1)?;
        positive("r1", r1)?;
        let qe = (l1 / c1).sqrt() / r1;
        Self::new(l1, c1, r1, lp, qe, qe)
    }

    pub fn validate(&self) -> Result<()> {
        positive("l1", self.l1)?;
        positive("c1", self.c1)?;
        positive("r1", self.r1)?;
        non_negative("lp", self.lp)?;
        positive("qt", self.qt)?;
        positive("qe", self.qe)?;
        if self.qt > self.qe {
            return Err(Error::invalid("qt", "must not exceed qe"));
        }
        Ok(())
    }

    /// Microwave efficiency `qt/qe`.
    pub fn eta_mw(&self) -> T {
        self.qt / self.qe
    }

    /// Sets `qt` so that `qt/qe = eta`.
    pub fn with_eta_mw(mut self, eta: T) -> Result<Self> {
        self.qt = self.qe * eta;
        self.validate()?;
        Ok(self)
    }

    pub fn total_inductance(&self) -> T {
        self.l1 + self.lp
    }

    /// Bare series resonance including the parasitic inductance.
    pub fn bare_omega(&self) -> T {
        T::one() / (self.total_inductance() * self.c1).sqrt()
    }

    pub fn characteristic_impedance(&self) -> T {
        (self.l1 / self.c1).sqrt()
    }

    /// Series reactance `omega (l1 + lp) - 1/(omega c1)`.
    pub fn reactance(&self, omega: T) -> T {
        omega * self.total_inductance() - T::one() / (omega * self.c1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BiasRegion {
    Supercurrent,
    ShapiroStep,
    Normal,
}

impl BiasRegion {
    pub fn label(self) -> &'static str {
        match self {
            BiasRegion::Supercurrent => "supercurrent",
            BiasRegion::ShapiroStep => "shapiro_step",
            BiasRegion::Normal => "normal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint<T> {
    pub ib: T,
    pub omega: T,
    pub i1: T,
    pub i1_reduced: T,
    pub ij_dc: T,
    pub phic: T,
    pub p_out: T,
    pub p_dc: T,
    pub efficiency: T,
    pub region: BiasRegion,
    /// `Re Z_J + r1` at the solution (ohm).
    pub residual_re: T,
    /// Total loop reactance at the solution (ohm).
    pub residual_im: T,
}

impl<T: Real> OperatingPoint<T> {
    pub fn frequency(&self) -> T {
        self.omega / (T::lit(2.0) * T::PI())
    }

    pub fn voltage(&self) -> T {
        shapiro_voltage(self.omega)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Relative tolerance on the emission frequency.
    pub rel_tol: T,
    /// Grid points per bracket scan.
    pub scan_points: usize,
    /// Relative half-widths of the successive scan windows around the bare resonance.
    pub spans: [f64; 5],
    /// Acceptance threshold for both residuals (ohm).
    pub residual_tol: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-14),
            scan_points: 400,
            spans: [0.02, 0.05, 0.1, 0.25, 0.6],
            residual_tol: T::lit(1e-9),
        }
    }
}

/// Oscillation amplitude that balances the junction gain against `r1`:
/// `-Re Z_J(I1) = r1` has the single root `I1 = sqrt(hbar omega <I_J> / (e r1))`,
/// where `d(Re Z_J + r1)/dI1 > 0`, so the root is amplitude-stable.
pub fn balanced_amplitude<T: Real>(omega: T, ij: T, r1: T) -> Option<T> {
    if !(ij > T::zero()) {
        return None;
    }
    let c = PhysicalConstants::<T>::codata2018();
    Some((c.hbar * omega * ij / (c.e * r1)).sqrt())
}

fn loop_reactance<T: Real>(
    j: &JunctionParams<T>,
    r: &ResonatorParams<T>,
    ib: T,
    omega: T,
) -> Option<T> {
    let ij = dc_junction_current(ib, j.rs, omega);
    let i1 = balanced_amplitude(omega, ij, r.r1)?;
    let z = junction_impedance(j, omega, i1, ij).ok()?;
    Some(z.im + r.reactance(omega))
}

pub fn solve_operating_point<T: Real>(
    j: &JunctionParams<T>,
    r: &ResonatorParams<T>,
    ib: T,
) -> Result<OperatingPoint<T>> {
    solve_operating_point_with(j, r, ib, &SolverOptions::default())
}

/// Solves `Re Z_J + r1 = 0` and `Im Z_J + omega (l1+lp) - 1/(omega c1) = 0`
/// with `<I_J>` recomputed from `ib` at each trial frequency.
///
/// The amplitude equation is solved in closed form for each trial `omega`;
/// the frequency is bracketed by scanning windows of growing width around
/// the bare resonance and refined with Brent's method. When several
/// frequencies balance the reactance, the one closest to the bare resonance
/// is returned.
pub fn solve_operating_point_with<T: Real>(
    j: &JunctionParams<T>,
    r: &ResonatorParams<T>,
    ib: T,
    opts: &SolverOptions<T>,
) -> Result<OperatingPoint<T>> {
    j.validate()?;
    r.validate()?;
    if !ib.is_finite() {
        return Err(Error::invalid("ib", "must be finite"));
    }
    let w0 = r.bare_omega();
    let n = opts.scan_points.max(8);
    let mut any_feasible = false;
    let mut bracket: Option<(T, T)> = None;

    for &span in &opts.spans {
        let span = T::lit(span);
        let grid: Vec<T> = (0..=n)
            .map(|k| {
                let u = T::lit(2.0) * T::from_usize_lossy(k) / T::from_usize_lossy(n) - T::one();
                w0 * (T::one() + span * u)
            })
            .collect();
        let vals: Vec<Option<T>> = grid.iter().map(|&w| loop_reactance(j, r, ib, w)).collect();
        any_feasible |= vals.iter().any(Option::is_some);
        let mut best: Option<(T, T, T)> = None;
        for k in 0..n {
            if let (Some(a), Some(b)) = (vals[k], vals[k + 1]) {
                if a.signum() != b.signum() || a == T::zero() {
                    let mid = (grid[k] + grid[k + 1]) / T::lit(2.0);
                    let dist = (mid - w0).abs();
                    if best.map_or(true, |(_, _, d)| dist < d) {
                        best = Some((grid[k], grid[k + 1], dist));
                    }
                }
            }
        }
        if let Some((a, b, _)) = best {
            bracket = Some((a, b));
            break;
        }
    }

    let (a, b) = match bracket {
        Some(ab) => ab,
        None => {
            let reason = if any_feasible {
                "no frequency balances the loop reactance"
            } else {
                "bias outside the phase-locked region"
            };
            return Err(Error::NoOscillation {
                ib: ib.as_f64(),
                reason: reason.into(),
            });
        }
    };

    let ropts = RootOptions {
        xtol: T::zero(),
        rtol: opts.rel_tol,
        max_iter: 200,
    };
    let omega = brent(
        |w| loop_reactance(j, r, ib, w).unwrap_or_else(T::nan),
        a,
        b,
        ropts,
    )?;
    operating_point_at(j, r, ib, omega, opts.residual_tol)
}

fn operating_point_at<T: Real>(
    j: &JunctionParams<T>,
    r: &ResonatorParams<T>,
    ib: T,
    omega: T,
    residual_tol: T,
) -> Result<OperatingPoint<T>> {
    let ij = dc_junction_current(ib, j.rs, omega);
    let i1 = balanced_amplitude(omega, ij, r.r1).ok_or_else(|| Error::NoOscillation {
        ib: ib.as_f64(),
        reason: "no junction DC current at the balanced frequency".into(),
    })?;
    let z = junction_impedance(j, omega, i1, ij)?;
    let residual_re = z.re + r.r1;
    let residual_im = z.im + r.reactance(omega);
    let residual = residual_re.abs().max(residual_im.abs());
    // rounding floor of the reactance sum at the working precision
    let scale = omega * r.total_inductance() + T::one() / (omega * r.c1);
    let floor = T::lit(100.0) * T::epsilon() * scale;
    if !(residual < residual_tol.max(floor)) {
        return Err(Error::NonConvergence {
            iterations: 200,
            residual: residual.as_f64(),
        });
    }
    let x = reduced_drive(i1, omega, j.cs);
    let p_out = output_power(ij, omega, r.qt, r.qe);
    let p_dc = ib * shapiro_voltage(omega);
    Ok(OperatingPoint {
        ib,
        omega,
        i1,
        i1_reduced: x,
        ij_dc: ij,
        phic: locking_phase(ij, j.ic, x)?,
        p_out,
        p_dc,
        efficiency: p_out / p_dc,
        region: BiasRegion::ShapiroStep,
        residual_re,
        residual_im,
    })
}

/// `sqrt(l1/c1) / (R_J + r1)`.
pub fn total_quality_factor<T: Real>(r: &ResonatorParams<T>, zj: &ComplexImpedance<T>) -> Result<T> {
    let net = zj.re + r.r1;
    if net.abs() < T::lit(1e-15) {
        return Err(Error::Diverging {
            net_resistance: net.as_f64(),
        });
    }
    Ok(r.characteristic_impedance() / net)
}

/// Delivered RF power `(qt/qe) <I_J> hbar omega / 2e`.
pub fn output_power<T: Real>(ij: T, omega: T, qt: T, qe: T) -> T {
    qt / qe * ij * shapiro_voltage(omega)
}

/// Upper bound on the delivered power, reached at `<I_J> = max|J1| Ic`.
pub fn max_output_power<T: Real>(ic: T, omega: T) -> T {
    j1_max::<T>().1 * ic * shapiro_voltage(omega)
}

/// Numeric prefactor `k` of the optimal load `k pi Ic / (Phi0 Cs^2 omega^3)`:
/// `k = 4 max|J1| / x*^2` with `x*` the argument of the maximum.
pub fn optimal_load_prefactor<T: Real>() -> T {
    let (x, j) = j1_max::<T>();
    T::lit(4.0) * j / (x * x)
}

/// Series loss at which the locking bound is reached exactly at the `|J1|` maximum.
pub fn optimal_load<T: Real>(ic: T, cs: T, omega: T) -> T {
    let c = PhysicalConstants::<T>::codata2018();
    optimal_load_prefactor::<T>() * T::PI() * ic / (c.phi0 * cs * cs * omega * omega * omega)
}

/// Smallest critical current able to deliver `p_target` at `omega`.
pub fn required_critical_current<T: Real>(p_target: T, omega: T) -> T {
    p_target / (j1_max::<T>().1 * shapiro_voltage(omega))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow<T> {
    pub ib: T,
    pub region: BiasRegion,
    pub f_emit: Option<T>,
    pub p_out: Option<T>,
    pub v_dc: T,
    pub point: Option<OperatingPoint<T>>,
    /// Set when the solver failed numerically at this bias.
    pub flag: Option<String>,
}

/// Classifies each bias: supercurrent below `ic`, Shapiro step where a locked
/// oscillation exists, normal (Ohmic through `rs`) otherwise.
pub fn bias_sweep<T: Real>(
    j: &JunctionParams<T>,
    r: &ResonatorParams<T>,
    ib_grid: &[T],
) -> Result<Vec<BiasRow<T>>> {
    j.validate()?;
    r.validate()?;
    let increasing = ib_grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = ib_grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::invalid("ib_grid", "must be strictly monotone"));
    }
    Ok(ib_grid.par_iter().map(|&ib| bias_row(j, r, ib)).collect())
}

fn bias_row<T: Real>(j: &JunctionParams<T>, r: &ResonatorParams<T>, ib: T) -> BiasRow<T> {
    let normal = |flag| BiasRow {
        ib,
        region: BiasRegion::Normal,
        f_emit: None,
        p_out: None,
        v_dc: ib * j.rs,
        point: None,
        flag,
    };
    if ib.abs() < j.ic {
        return BiasRow {
            ib,
            region: BiasRegion::Supercurrent,
            f_emit: None,
            p_out: None,
            v_dc: T::zero(),
            point: None,
            flag: None,
        };
    }
    match solve_operating_point(j, r, ib) {
        Ok(op) => BiasRow {
            ib,
            region: BiasRegion::ShapiroStep,
            f_emit: Some(op.frequency()),
            p_out: Some(op.p_out),
            v_dc: op.voltage(),
            point: Some(op),
            flag: None,
        },
        Err(Error::NoOscillation { .. }) => normal(None),
        Err(e) => normal(Some(e.to_string())),
    }
}

/// `d f_emit / d ib` by central difference with a 1 nA step.
pub fn frequency_sensitivity<T: Real>(j: &JunctionParams<T>, r: &ResonatorParams<T>, ib: T) -> Result<T> {
    frequency_sensitivity_with_step(j, r, ib, T::lit(1e-9))
}

pub fn frequency_sensitivity_with_step<T: Real>(
    j: &JunctionParams<T>,
    r: &ResonatorParams<T>,
    ib: T,
    step: T,
) -> Result<T> {
    let hi = solve_operating_point(j, r, ib + step)?;
    let lo = solve_operating_point(j, r, ib - step)?;
    Ok((hi.frequency() - lo.frequency()) / (T::lit(2.0) * step))
}

/// Lower and upper bias edges of the Shapiro step inside `[lo, hi]`,
/// located by a coarse scan of `n` points and bisection to `tol` amperes.
pub fn step_edges<T: Real>(
    j: &JunctionParams<T>,
    r: &ResonatorParams<T>,
    lo: T,
    hi: T,
    n: usize,
    tol: T,
) -> Option<(T, T)> {
    let locked = |ib: T| solve_operating_point(j, r, ib).is_ok();
    let n = n.max(2);
    let grid: Vec<T> = (0..=n)
        .map(|k| lo + (hi - lo) * T::from_usize_lossy(k) / T::from_usize_lossy(n))
        .collect();
    let flags: Vec<bool> = grid.par_iter().map(|&ib| locked(ib)).collect();
    let first = flags.iter().position(|&f| f)?;
    let last = flags.iter().rposition(|&f| f)?;
    let refine = |mut inside: T, mut outside: T| {
        while (inside - outside).abs() > tol {
            let mid = (inside + outside) / T::lit(2.0);
            if locked(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lower = if first == 0 { grid[0] } else { refine(grid[first], grid[first - 1]) };
    let upper = if last == n { grid[n] } else { refine(grid[last], grid[last + 1]) };
    Some((lower, upper))
}
