use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::FLUX_QUANTUM;
use crate::error::{Result, SimError};

/// Resistively and capacitively shunted junction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    /// Critical current Ic, A.
    pub critical_current: f64,
    /// Shunt resistance R, Ω.
    pub shunt_resistance: f64,
    /// Junction capacitance, F. Zero selects the overdamped limit.
    pub capacitance: f64,
    /// Relaxation-oscillator (latching) junction.
    #[serde(default)]
    pub hysteretic: bool,
}

impl JunctionParams {
    /// Builds a junction whose capacitance is chosen to give the requested
    /// Stewart–McCumber parameter.
    pub fn with_beta_c(critical_current: f64, shunt_resistance: f64, beta_c: f64) -> Self {
        let capacitance =
            beta_c * FLUX_QUANTUM / (2.0 * PI * critical_current * shunt_resistance.powi(2));
        Self {
            critical_current,
            shunt_resistance,
            capacitance,
            hysteretic: beta_c > 1.0,
        }
    }

    /// Stewart–McCumber parameter β_c = 2π·Ic·R²·C/Φ0.
    pub fn beta_c(&self) -> f64 {
        2.0 * PI * self.critical_current * self.shunt_resistance.powi(2) * self.capacitance
            / FLUX_QUANTUM
    }

    /// Characteristic voltage Ic·R.
    pub fn characteristic_voltage(&self) -> f64 {
        self.critical_current * self.shunt_resistance
    }

    /// Fluxon energy Ic·Φ0 dissipated per 2π slip.
    pub fn switching_energy(&self) -> f64 {
        self.critical_current * FLUX_QUANTUM
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.critical_current > 0.0) {
            return Err(SimError::param(format!("{path}.critical_current"), "must be > 0"));
        }
        if !(self.shunt_resistance > 0.0) {
            return Err(SimError::param(format!("{path}.shunt_resistance"), "must be > 0"));
        }
        if !(self.capacitance >= 0.0) {
            return Err(SimError::param(format!("{path}.capacitance"), "must be >= 0"));
        }
        if self.hysteretic && self.beta_c() <= 1.0 {
            return Err(SimError::param(
                format!("{path}.hysteretic"),
                format!("hysteretic junction requires beta_c > 1 (got {:.3})", self.beta_c()),
            ));
        }
        Ok(())
    }
}

/// Time-averaged voltage of an overdamped junction under constant bias.
///
/// Closed form of the resistively shunted junction: zero on the
/// superconducting branch, `R·sqrt(I² − Ic²)` above the critical current.
pub fn rsj_mean_voltage(params: &JunctionParams, bias: f64) -> Result<f64> {
    if bias < 0.0 {
        return Err(SimError::Domain(format!("negative bias current {bias:e} A")));
    }
    if params.capacitance != 0.0 {
        return Err(SimError::Domain(
            "closed-form mean voltage requires the overdamped limit (capacitance = 0)".into(),
        ));
    }
    let ic = params.critical_current;
    if bias <= ic {
        return Ok(0.0);
    }
    Ok(params.shunt_resistance * (bias * bias - ic * ic).sqrt())
}

/// Number of fluxons a loop of inductance `inductance` can hold before the
/// junction of critical current `critical_current` switches: β_L/2π = L·Ic/Φ0.
pub fn loop_storage_capacity(inductance: f64, critical_current: f64) -> Result<f64> {
    if !(inductance > 0.0) || !(critical_current > 0.0) {
        return Err(SimError::Domain(format!(
            "loop capacity needs L > 0 and Ic > 0 (got L = {inductance:e}, Ic = {critical_current:e})"
        )));
    }
    Ok(inductance * critical_current / FLUX_QUANTUM)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overdamped() -> JunctionParams {
        JunctionParams {
            critical_current: 10e-6,
            shunt_resistance: 2.0,
            capacitance: 0.0,
            hysteretic: false,
        }
    }

    #[test]
    fn rsj_below_critical_current_is_zero() {
        assert_eq!(rsj_mean_voltage(&overdamped(), 8e-6).unwrap(), 0.0);
        assert_eq!(rsj_mean_voltage(&overdamped(), 10e-6).unwrap(), 0.0);
    }

    #[test]
    fn rsj_closed_form_values() {
        let v = rsj_mean_voltage(&overdamped(), 20e-6).unwrap();
        assert!((v - 34.641e-6).abs() < 1e-9, "{v}");
        let v = rsj_mean_voltage(&overdamped(), 10.1e-6).unwrap();
        assert!((v - 2.836e-6).abs() < 1e-9, "{v}");
    }

    #[test]
    fn rsj_rejects_negative_bias_and_capacitance() {
        assert!(matches!(
            rsj_mean_voltage(&overdamped(), -1e-6),
            Err(SimError::Domain(_))
        ));
        let j = JunctionParams::with_beta_c(10e-6, 2.0, 0.3);
        assert!(rsj_mean_voltage(&j, 20e-6).is_err());
    }

    #[test]
    fn capacity_values() {
        let c = loop_storage_capacity(10e-6, 10e-6).unwrap();
        assert!((c / 4.836e4 - 1.0).abs() < 1e-3, "{c}");
        let one = loop_storage_capacity(FLUX_QUANTUM / 10e-6, 10e-6).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let ss = loop_storage_capacity(90e-12, 40e-6).unwrap();
        assert!((ss - 1.741).abs() < 1e-3, "{ss}");
        assert!(loop_storage_capacity(0.0, 1e-6).is_err());
        assert!(loop_storage_capacity(1e-9, -1e-6).is_err());
    }

    #[test]
    fn beta_c_round_trip_and_hysteresis_check() {
        let j = JunctionParams::with_beta_c(10e-6, 2.0, 0.3);
        assert!((j.beta_c() - 0.3).abs() < 1e-12);
        assert!(!j.hysteretic);
        j.validate("j").unwrap();
        let mut bad = j;
        bad.hysteretic = true;
        assert!(bad.validate("j").is_err());
        let latching = JunctionParams::with_beta_c(10e-6, 2.0, 5.0);
        assert!(latching.hysteretic);
        latching.validate("j").unwrap();
    }
}
