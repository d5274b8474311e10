//! CODATA 2018 exact constants.

use crate::scalar::Real;

/// Elementary charge (C), exact in SI since 2019.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant (J s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant (J/K), exact.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Physical constants in the working scalar type.
///
/// The flux quantum and reduced Planck constant are derived from `e` and `h`
/// rather than stored independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    pub e: T,
    pub h: T,
    pub hbar: T,
    pub phi0: T,
    pub kb: T,
}

impl<T: Real> PhysicalConstants<T> {
    pub fn codata2018() -> Self {
        let e = T::lit(ELEMENTARY_CHARGE);
        let h = T::lit(PLANCK);
        let two = T::lit(2.0);
        Self {
            e,
            h,
            hbar: h / (two * T::PI()),
            phi0: h / (two * e),
            kb: T::lit(BOLTZMANN),
        }
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::codata2018()
    }
}

/// Magnetic flux quantum h/2e (Wb).
#[inline]
pub fn flux_quantum<T: Real>() -> T {
    PhysicalConstants::<T>::codata2018().phi0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_is_h_over_2e() {
        let c = PhysicalConstants::<f64>::codata2018();
        assert!((c.phi0 - c.h / (2.0 * c.e)).abs() <= f64::EPSILON * c.phi0);
        assert!((c.phi0 - 2.067_833_848e-15).abs() < 1e-24);
    }

    #[test]
    fn hbar_matches_codata() {
        let c = PhysicalConstants::<f64>::codata2018();
        assert!((c.hbar / 1.054_571_817e-34 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_precision_is_finite() {
        let c = PhysicalConstants::<f32>::codata2018();
        assert!(c.phi0.is_normal() && c.hbar.is_normal() && c.kb.is_normal());
    }
}
