//! Physical constants (SI, exact 2019 definitions).

use serde::{Deserialize, Serialize};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge, C.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
/// Magnetic flux quantum h/(2e), Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELECTRON_CHARGE);
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The constants the simulator depends on, bundled so that they can be
/// reported alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub flux_quantum: f64,
    pub electron_charge: f64,
    pub planck: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            flux_quantum: FLUX_QUANTUM,
            electron_charge: ELECTRON_CHARGE,
            planck: PLANCK,
        }
    }
}

impl PhysicalConstants {
    /// Φ0 / 2π, the factor between phase rate and voltage.
    pub fn reduced_flux_quantum(&self) -> f64 {
        self.flux_quantum / (2.0 * std::f64::consts::PI)
    }

    /// Photon energy hν at the given optical frequency.
    pub fn photon_energy(&self, frequency: f64) -> f64 {
        self.planck * frequency
    }
}
