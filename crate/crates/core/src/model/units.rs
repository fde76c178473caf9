//! Unit conventions.
//!
//! Configuration and equilibrium quantities are expressed in wavenumbers
//! (cm^-1) with inverse temperature in cm. Dynamics run in angular frequency
//! (rad/ps) and time in ps. The two constants below pin the conversion.

/// Speed of light in cm/ps.
pub const SPEED_OF_LIGHT_CM_PER_PS: f64 = 0.029_979_245_8;

/// Boltzmann constant in cm^-1 per kelvin.
pub const BOLTZMANN_CM_PER_K: f64 = 0.695_034_76;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSystem {
    /// rad/ps per cm^-1, equal to 2*pi*c.
    pub wavenumber_to_angular: f64,
    /// k_B in cm^-1 / K.
    pub boltzmann: f64,
}

impl UnitSystem {
    pub const STANDARD: UnitSystem = UnitSystem {
        wavenumber_to_angular: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_CM_PER_PS,
        boltzmann: BOLTZMANN_CM_PER_K,
    };

    #[inline]
    pub fn to_angular(&self, wavenumber: f64) -> f64 {
        wavenumber * self.wavenumber_to_angular
    }

    #[inline]
    pub fn to_wavenumber(&self, angular: f64) -> f64 {
        angular / self.wavenumber_to_angular
    }

    /// Inverse temperature in cm (so that `beta * omega_cm` is dimensionless).
    pub fn beta_wavenumber(&self, temperature_k: f64) -> f64 {
        1.0 / (self.boltzmann * temperature_k)
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Shorthand for the standard conversion factor (rad/ps per cm^-1).
pub const WAVENUMBER_TO_ANGULAR: f64 = UnitSystem::STANDARD.wavenumber_to_angular;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_constant_value() {
        assert!((WAVENUMBER_TO_ANGULAR - 0.188_365_156_7).abs() < 1e-10);
    }

    #[test]
    fn round_trip_is_identity() {
        let u = UnitSystem::STANDARD;
        for &w in &[1e-6, 0.575, 20.0, 87.7, 200.0, 1.0e4] {
            let back = u.to_wavenumber(u.to_angular(w));
            assert!(((back - w) / w).abs() <= 1e-14, "{w} -> {back}");
        }
    }

    #[test]
    fn beta_at_300k() {
        let u = UnitSystem::STANDARD;
        let beta = u.beta_wavenumber(300.0);
        assert!((1.0 / beta - 208.510_428).abs() < 1e-6);
    }
}
