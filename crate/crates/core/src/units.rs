//! Conversion from the dimensionless simulation variables to SI values.
//!
//! The simulation works in the scaled frame reached by
//! `{x, t, psi, V0} -> {x eta, t eta^2, psi / eta, V0 / eta^2}` from the
//! natural trap units (`a_perp` for length, `1/omega_perp` for time,
//! `hbar omega_perp` for energy). Undoing both steps gives
//!
//! * length: `value * eta * a_perp`
//! * time:   `value * eta^2 / omega_perp`
//! * energy: `value * hbar * omega_perp / eta^2`
//!
//! With `eta = 10` and `a_perp = 1 um` a half width of 50 maps to 500 um.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    Length,
    Time,
    Energy,
}

impl FromStr for QuantityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "length" => Ok(QuantityKind::Length),
            "time" => Ok(QuantityKind::Time),
            "energy" => Ok(QuantityKind::Energy),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScale {
    /// Radial trap frequency in rad/s.
    pub omega_perp: f64,
    /// Atomic mass in kg.
    pub mass: f64,
    pub eta: f64,
}

impl Default for PhysicalScale {
    /// 87Rb in a 2 pi x 100 Hz guide with `eta = 10`.
    fn default() -> Self {
        PhysicalScale {
            omega_perp: 2.0 * std::f64::consts::PI * 100.0,
            mass: RB87_MASS,
            eta: 10.0,
        }
    }
}

impl PhysicalScale {
    pub fn new(omega_perp: f64, mass: f64, eta: f64) -> Result<Self> {
        let s = PhysicalScale {
            omega_perp,
            mass,
            eta,
        };
        s.validate()?;
        Ok(s)
    }

    /// Scale whose oscillator length is exactly `a_perp`; the mass is
    /// inferred from `a_perp = sqrt(hbar / (m omega_perp))`.
    pub fn with_oscillator_length(a_perp: f64, omega_perp: f64, eta: f64) -> Result<Self> {
        if !(a_perp > 0.0) {
            return Err(Error::invalid("a_perp", "must be positive"));
        }
        PhysicalScale::new(omega_perp, HBAR / (omega_perp * a_perp * a_perp), eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_perp > 0.0) {
            return Err(Error::invalid("omega_perp", "must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::invalid("mass", "must be positive"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::invalid("eta", "must be positive"));
        }
        Ok(())
    }

    pub fn a_perp(&self) -> f64 {
        (HBAR / (self.mass * self.omega_perp)).sqrt()
    }

    pub fn to_physical(&self, value: f64, kind: QuantityKind) -> f64 {
        match kind {
            QuantityKind::Length => value * self.eta * self.a_perp(),
            QuantityKind::Time => value * self.eta * self.eta / self.omega_perp,
            QuantityKind::Energy => value * HBAR * self.omega_perp / (self.eta * self.eta),
        }
    }
}

/// String-keyed form of [`PhysicalScale::to_physical`].
pub fn to_physical(value: f64, kind: &str, scale: &PhysicalScale) -> Result<f64> {
    scale.validate()?;
    Ok(scale.to_physical(value, kind.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn half_width_in_microns() {
        let s =
            PhysicalScale::with_oscillator_length(1e-6, 2.0 * std::f64::consts::PI * 100.0, 10.0).unwrap();
        assert_relative_eq!(
            to_physical(50.0, "length", &s).unwrap(),
            500e-6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn identity_scaling() {
        let s = PhysicalScale::with_oscillator_length(1e-6, 100.0, 1.0).unwrap();
        assert_relative_eq!(
            s.to_physical(1.0, QuantityKind::Length),
            1e-6,
            max_relative = 1e-12
        );
        assert_eq!(s.to_physical(0.0, QuantityKind::Time), 0.0);
    }

    #[test]
    fn rubidium_oscillator_length_is_about_a_micron() {
        let a = PhysicalScale::default().a_perp();
        assert!((0.9e-6..1.2e-6).contains(&a), "{a}");
    }

    #[test]
    fn unknown_kind() {
        let s = PhysicalScale::default();
        assert_eq!(
            to_physical(1.0, "mass", &s),
            Err(Error::UnknownKind("mass".into()))
        );
        assert!(PhysicalScale::new(-1.0, 1.0, 1.0).is_err());
    }
}
