//! Capacitively shunted junction under a phase-locked RF drive: junction
//! parameters, derived scales, and the perturbative junction impedance.

use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j, bessel_j012};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Drive amplitudes below this floor are treated as zero drive.
pub const DRIVE_FLOOR: f64 = 1e-12;

/// Critical current, shunt capacitance, and DC shunt resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams<T> {
    pub ic: T,
    pub cs: T,
    pub rs: T,
}

impl<T: Real> JunctionParams<T> {
    pub fn new(ic: T, cs: T, rs: T) -> Result<Self> {
        let p = Self { ic, cs, rs };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("ic", self.ic)?;
        positive("cs", self.cs)?;
        positive("rs", self.rs)
    }
}

pub(crate) fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {}", v)))
    }
}

pub(crate) fn non_negative<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() && v >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {}", v)))
    }
}

/// Impedance `re + j im` in ohms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexImpedance<T> {
    pub re: T,
    pub im: T,
}

/// Phase-locked drive state of the junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveState<T> {
    pub omega: T,
    pub i1: T,
    /// Dimensionless drive `2 pi I1 / (Phi0 omega^2 Cs)`.
    pub i1_reduced: T,
    /// Locking phase on the principal branch, `|phic| <= pi/2`.
    pub phic: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionScales<T> {
    /// Josephson inductance (H).
    pub lj: T,
    /// Plasma angular frequency (rad/s).
    pub omega_p: T,
    /// Charging energy of the shunt capacitance (J).
    pub ec: T,
    /// Josephson energy (J).
    pub ej: T,
}

pub fn derived_junction_quantities<T: Real>(j: &JunctionParams<T>) -> JunctionScales<T> {
    let c = PhysicalConstants::<T>::codata2018();
    let two = T::lit(2.0);
    let lj = c.phi0 / (two * T::PI() * j.ic);
    JunctionScales {
        lj,
        omega_p: T::one() / (lj * j.cs).sqrt(),
        ec: c.e * c.e / (two * j.cs),
        ej: c.phi0 * j.ic / (two * T::PI()),
    }
}

/// Plasma frequency from the energy scales, `sqrt(8 EJ Ec)/hbar`.
pub fn plasma_frequency_from_energies<T: Real>(s: &JunctionScales<T>) -> T {
    let c = PhysicalConstants::<T>::codata2018();
    (T::lit(8.0) * s.ej * s.ec).sqrt() / c.hbar
}

/// DC current through the junction branch: bias minus the shunt current at
/// the Shapiro voltage `Phi0 omega / 2 pi`.
pub fn dc_junction_current<T: Real>(ib: T, rs: T, omega: T) -> T {
    ib - shapiro_voltage(omega) / rs
}

/// Average junction voltage on the first Shapiro step.
pub fn shapiro_voltage<T: Real>(omega: T) -> T {
    let c = PhysicalConstants::<T>::codata2018();
    c.phi0 * omega / (T::lit(2.0) * T::PI())
}

/// Dimensionless drive amplitude.
pub fn reduced_drive<T: Real>(i1: T, omega: T, cs: T) -> T {
    let c = PhysicalConstants::<T>::codata2018();
    T::lit(2.0) * T::PI() * i1 / (c.phi0 * omega * omega * cs)
}

/// Locking phase `arcsin(-<I_J> / (Ic J1(i1_reduced)))`.
pub fn locking_phase<T: Real>(ij: T, ic: T, i1_reduced: T) -> Result<T> {
    positive("ic", ic)?;
    let ratio = locking_ratio(ij, ic, bessel_j(1, i1_reduced))?;
    Ok((-ratio).asin())
}

/// `<I_J> / (Ic J1)`, checked against the locking bound.
fn locking_ratio<T: Real>(ij: T, ic: T, j1: T) -> Result<T> {
    if ij == T::zero() {
        return Ok(T::zero());
    }
    let bound = ic * j1.abs();
    if ij.abs() > bound {
        return Err(Error::Unlocked {
            ij: ij.as_f64(),
            bound: bound.as_f64(),
        });
    }
    Ok((ij / (ic * j1)).max(-T::one()).min(T::one()))
}

/// Full drive state for `(omega, i1)` at junction DC current `ij`.
pub fn drive_state<T: Real>(j: &JunctionParams<T>, omega: T, i1: T, ij: T) -> Result<DriveState<T>> {
    let x = reduced_drive(i1, omega, j.cs);
    Ok(DriveState {
        omega,
        i1,
        i1_reduced: x,
        phic: locking_phase(ij, j.ic, x)?,
    })
}

/// Effective impedance of the shunted junction seen by the resonator loop.
///
/// The real part is `-hbar omega <I_J> / (e I1^2)`; the imaginary part is the
/// shunt reactance reduced by the Josephson term
/// `(Ic/I1) [J0 - J2] sqrt(1 - (<I_J>/(Ic J1))^2)`.
pub fn junction_impedance<T: Real>(
    j: &JunctionParams<T>,
    omega: T,
    i1: T,
    ij: T,
) -> Result<ComplexImpedance<T>> {
    positive("omega", omega)?;
    if !(i1.abs() >= T::lit(DRIVE_FLOOR)) {
        return Err(Error::Degenerate { i1: i1.as_f64() });
    }
    let c = PhysicalConstants::<T>::codata2018();
    let x = reduced_drive(i1, omega, j.cs);
    let (j0, j1, j2) = bessel_j012(x);
    let ratio = locking_ratio(ij, j.ic, j1)?;
    let re = -c.hbar * omega * ij / (c.e * i1 * i1);
    let bracket = T::one() - j.ic / i1 * (j0 - j2) * (T::one() - ratio * ratio).sqrt();
    let im = -bracket / (omega * j.cs);
    Ok(ComplexImpedance { re, im })
}
