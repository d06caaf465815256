//! Behavioral models of the non-junction devices: the single-photon
//! detector, nTron and hTron current/voltage amplifiers, the LED, and the
//! efficiency of the whole transmitter chain.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::constants::{ELECTRON_CHARGE, PLANCK};
use crate::error::{Result, SimError};
use crate::rng::stream_rng;

/// Single-photon detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpdParams {
    /// Kinetic inductance L_spd, H.
    pub inductance: f64,
    /// Resistance the bias is diverted across during recovery, Ω.
    pub recovery_resistance: f64,
    pub hotspot_resistance: f64,
    pub hotspot_duration: f64,
    /// Bias current I_spd, A.
    pub bias: f64,
    pub detection_efficiency: f64,
}

impl Default for SpdParams {
    fn default() -> Self {
        Self {
            inductance: 72e-9,
            recovery_resistance: 2.0,
            hotspot_resistance: 5e3,
            hotspot_duration: 200e-12,
            bias: 10e-6,
            detection_efficiency: 1.0,
        }
    }
}

impl SpdParams {
    /// Recovery time constant L_spd / r_spd.
    pub fn tau(&self) -> f64 {
        self.inductance / self.recovery_resistance
    }

    /// Stored inductive energy ½·L_spd·I_spd², released on every detection.
    pub fn detection_energy(&self) -> f64 {
        0.5 * self.inductance * self.bias * self.bias
    }

    /// Delay after a detection until the diverted current falls below
    /// [`SPD_REARM_FRACTION`] of the bias and the detector can fire again.
    pub fn dead_time(&self) -> f64 {
        self.hotspot_duration + self.tau() * (1.0 / SPD_REARM_FRACTION).ln()
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for (field, v) in [
            ("inductance", self.inductance),
            ("recovery_resistance", self.recovery_resistance),
            ("hotspot_resistance", self.hotspot_resistance),
            ("hotspot_duration", self.hotspot_duration),
            ("bias", self.bias),
        ] {
            if !(v > 0.0) {
                return Err(SimError::param(format!("{path}.{field}"), "must be > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            return Err(SimError::param(format!("{path}.detection_efficiency"), "must lie in [0, 1]"));
        }
        if self.tau() <= self.hotspot_duration {
            return Err(SimError::param(
                format!("{path}.recovery_resistance"),
                "recovery time constant must exceed the hotspot duration",
            ));
        }
        Ok(())
    }
}

/// Fraction of the bias still diverted at which the detector re-arms.
pub const SPD_REARM_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpdMode {
    Superconducting,
    Hotspot,
    Recovering,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdState {
    pub mode: SpdMode,
    pub t_last_detection: f64,
    pub diverted_current: f64,
}

impl Default for SpdState {
    fn default() -> Self {
        Self {
            mode: SpdMode::Superconducting,
            t_last_detection: f64::NEG_INFINITY,
            diverted_current: 0.0,
        }
    }
}

impl SpdState {
    /// State of the detector at time `t`, with no new photons.
    pub fn advance(&self, params: &SpdParams, t: f64) -> SpdState {
        if self.mode == SpdMode::Superconducting {
            return *self;
        }
        let dt = t - self.t_last_detection;
        if dt < 0.0 {
            return *self;
        }
        let diverted = spd_diverted_current(params, dt).unwrap_or(0.0);
        let mode = if dt <= params.hotspot_duration {
            SpdMode::Hotspot
        } else if diverted >= SPD_REARM_FRACTION * params.bias {
            SpdMode::Recovering
        } else {
            SpdMode::Superconducting
        };
        SpdState {
            mode,
            t_last_detection: self.t_last_detection,
            diverted_current: if mode == SpdMode::Superconducting { 0.0 } else { diverted },
        }
    }

    pub fn is_armed(&self) -> bool {
        self.mode == SpdMode::Superconducting
    }
}

/// Photon arrival at a detector. `draw` is a uniform sample in [0, 1) that
/// decides detection against the detector efficiency.
pub fn spd_detect(state: &SpdState, params: &SpdParams, t: f64, draw: f64) -> SpdState {
    let now = state.advance(params, t);
    if now.mode == SpdMode::Superconducting && draw < params.detection_efficiency {
        SpdState {
            mode: SpdMode::Hotspot,
            t_last_detection: t,
            diverted_current: params.bias,
        }
    } else {
        now
    }
}

/// Current diverted from the detector `dt` after a detection.
pub fn spd_diverted_current(params: &SpdParams, dt: f64) -> Result<f64> {
    if dt < 0.0 || dt.is_nan() {
        return Err(SimError::Domain(format!("negative time since detection {dt:e} s")));
    }
    if dt <= params.hotspot_duration {
        return Ok(params.bias);
    }
    Ok(params.bias * (-(dt - params.hotspot_duration) / params.tau()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NtronParams {
    pub gate_threshold: f64,
    /// Channel bias diverted to the load when switched, A.
    pub channel_current: f64,
    pub on_resistance: f64,
}

impl Default for NtronParams {
    fn default() -> Self {
        Self {
            gate_threshold: 60e-6,
            channel_current: 1.2e-3,
            on_resistance: 1e3,
        }
    }
}

/// Channel resistance for a gate current: a hard step at the threshold.
pub fn ntron_response(params: &NtronParams, gate_current: f64) -> f64 {
    if gate_current >= params.gate_threshold {
        params.on_resistance
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HtronParams {
    pub gate_threshold: f64,
    pub on_resistance: f64,
    pub switch_time: f64,
    pub switch_energy: f64,
}

impl Default for HtronParams {
    fn default() -> Self {
        Self {
            gate_threshold: 1.2e-3,
            on_resistance: 800e3,
            switch_time: 1e-9,
            switch_energy: 20e-15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtronResponse {
    pub resistance: f64,
    pub delay: f64,
    pub energy: f64,
}

/// Meander response for a gate current: `(on_resistance, switch_time,
/// switch_energy)` at or above threshold, zeros below.
pub fn htron_response(params: &HtronParams, gate_current: f64) -> HtronResponse {
    if gate_current >= params.gate_threshold {
        HtronResponse {
            resistance: params.on_resistance,
            delay: params.switch_time,
            energy: params.switch_energy,
        }
    } else {
        HtronResponse {
            resistance: 0.0,
            delay: 0.0,
            energy: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LedParams {
    pub capacitance: f64,
    pub quantum_efficiency: f64,
    pub drive_voltage: f64,
    pub photon_frequency: f64,
    pub drive_current: f64,
}

impl Default for LedParams {
    fn default() -> Self {
        Self {
            capacitance: 10e-15,
            quantum_efficiency: 1e-3,
            drive_voltage: 1.0,
            photon_frequency: 250e12,
            drive_current: 10e-6,
        }
    }
}

impl LedParams {
    pub fn photon_energy(&self) -> f64 {
        PLANCK * self.photon_frequency
    }

    /// Energy to charge the junction capacitance, ½·C·V².
    pub fn charging_energy(&self) -> f64 {
        0.5 * self.capacitance * self.drive_voltage.powi(2)
    }

    /// Pulse length that yields `n_photons` in expected-value mode.
    pub fn pulse_duration_for(&self, n_photons: u64) -> f64 {
        let carriers = n_photons as f64 / self.quantum_efficiency;
        let charge = carriers * ELECTRON_CHARGE - self.capacitance * self.drive_voltage;
        (charge / self.drive_current).max(0.0)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0) {
            return Err(SimError::param(format!("{path}.quantum_efficiency"), "must lie in (0, 1]"));
        }
        if !(self.photon_frequency > 0.0) {
            return Err(SimError::param(format!("{path}.photon_frequency"), "must be > 0"));
        }
        if !(self.drive_voltage > 0.5) {
            return Err(SimError::param(
                format!("{path}.drive_voltage"),
                "must exceed 0.5 V (semiconductor gap scale)",
            ));
        }
        if !(self.capacitance >= 0.0) || !(self.drive_current > 0.0) {
            return Err(SimError::param(path, "capacitance must be >= 0 and drive_current > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Emission {
    /// Photon count is the rounded mean.
    Expected,
    /// Photon count is binomially distributed; the draw uses stream `stream`
    /// of `seed`.
    Stochastic { seed: u64, stream: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonPulse {
    pub n_photons: u64,
    pub injected_carriers: u64,
    pub electrical_energy: f64,
}

const MAX_CARRIERS: f64 = 1e15;

/// Drives the LED for `pulse_duration`. Injected carriers come from the
/// drive charge plus the charge that sets the junction voltage.
pub fn led_emit(params: &LedParams, pulse_duration: f64, emission: Emission) -> Result<PhotonPulse> {
    if !(pulse_duration > 0.0) {
        return Err(SimError::Domain(format!("LED pulse duration must be > 0 (got {pulse_duration:e})")));
    }
    let carriers =
        (params.drive_current * pulse_duration + params.capacitance * params.drive_voltage) / ELECTRON_CHARGE;
    if !carriers.is_finite() || carriers > MAX_CARRIERS {
        return Err(SimError::Domain(format!("LED pulse injects {carriers:e} carriers; limit is {MAX_CARRIERS:e}")));
    }
    let injected = carriers.round() as u64;
    let n_photons = match emission {
        Emission::Expected => (injected as f64 * params.quantum_efficiency).round() as u64,
        Emission::Stochastic { seed, stream } => {
            let dist = Binomial::new(injected, params.quantum_efficiency)
                .map_err(|e| SimError::Domain(e.to_string()))?;
            dist.sample(&mut stream_rng(seed, stream))
        }
    };
    Ok(PhotonPulse {
        n_photons,
        injected_carriers: injected,
        electrical_energy: injected as f64 * ELECTRON_CHARGE * params.drive_voltage + params.charging_energy(),
    })
}

/// Energy model of the transmitter chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplifierEfficiencyModel {
    pub htron_switch_energy: f64,
    pub ntron_gate_energy: f64,
    /// Joule heating in the nTron and hTron per unit LED drive energy.
    pub joule_overhead: f64,
}

impl Default for AmplifierEfficiencyModel {
    fn default() -> Self {
        Self {
            htron_switch_energy: 20e-15,
            ntron_gate_energy: 0.0,
            joule_overhead: 9.34,
        }
    }
}

/// Per-stage energies of one firing event, J.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageEnergies {
    pub ntron_gate: f64,
    pub htron_switch: f64,
    pub led_charging: f64,
    pub led_injection: f64,
    pub joule_heating: f64,
}

impl StageEnergies {
    pub fn total(&self) -> f64 {
        self.ntron_gate + self.htron_switch + self.led_charging + self.led_injection + self.joule_heating
    }
}

impl std::ops::AddAssign for StageEnergies {
    fn add_assign(&mut self, o: Self) {
        self.ntron_gate += o.ntron_gate;
        self.htron_switch += o.htron_switch;
        self.led_charging += o.led_charging;
        self.led_injection += o.led_injection;
        self.joule_heating += o.joule_heating;
    }
}

impl AmplifierEfficiencyModel {
    /// Energy independent of the photon count.
    pub fn fixed_energy(&self, led: &LedParams) -> f64 {
        self.htron_switch_energy + self.ntron_gate_energy + led.charging_energy()
    }

    pub fn stage_energies(&self, led: &LedParams, n_photons: u64) -> StageEnergies {
        let injection = n_photons as f64 * ELECTRON_CHARGE * led.drive_voltage / led.quantum_efficiency;
        StageEnergies {
            ntron_gate: self.ntron_gate_energy,
            htron_switch: self.htron_switch_energy,
            led_charging: led.charging_energy(),
            led_injection: injection,
            joule_heating: injection * self.joule_overhead,
        }
    }

    /// Large-photon-number limit of the efficiency.
    pub fn asymptotic_efficiency(&self, led: &LedParams) -> f64 {
        led.quantum_efficiency * led.photon_energy() / (ELECTRON_CHARGE * led.drive_voltage)
            / (1.0 + self.joule_overhead)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.htron_switch_energy >= 0.0 && self.ntron_gate_energy >= 0.0) {
            return Err(SimError::param(path, "stage energies must be >= 0"));
        }
        if !(self.joule_overhead >= 0.0) {
            return Err(SimError::param(format!("{path}.joule_overhead"), "must be >= 0"));
        }
        Ok(())
    }
}

/// Total chain efficiency η_amp = N·hν / E_amp for `n_photons` photons.
pub fn amplifier_efficiency(model: &AmplifierEfficiencyModel, led: &LedParams, n_photons: u64) -> f64 {
    if n_photons == 0 {
        return 0.0;
    }
    n_photons as f64 * led.photon_energy() / model.stage_energies(led, n_photons).total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_rules() {
        let p = SpdParams::default();
        let s = spd_detect(&SpdState::default(), &p, 1e-9, 0.0);
        assert_eq!(s.mode, SpdMode::Hotspot);
        assert_eq!(s.t_last_detection, 1e-9);

        let blind = SpdParams {
            detection_efficiency: 0.0,
            ..p
        };
        for draw in [0.0, 0.3, 0.999] {
            assert_eq!(spd_detect(&SpdState::default(), &blind, 1e-9, draw), SpdState::default());
        }
        // dead during the hotspot and early recovery
        let again = spd_detect(&s, &p, 1.1e-9, 0.0);
        assert_eq!(again.mode, SpdMode::Hotspot);
        assert_eq!(again.t_last_detection, 1e-9);
        let mid = spd_detect(&s, &p, 1e-9 + 10e-9, 0.0);
        assert_eq!(mid.mode, SpdMode::Recovering);
        assert_eq!(mid.t_last_detection, 1e-9);
        let later = spd_detect(&s, &p, 1e-9 + p.dead_time() + 1e-12, 0.0);
        assert_eq!(later.mode, SpdMode::Hotspot);
        assert!(later.t_last_detection > 1e-9);
    }

    #[test]
    fn diverted_current_profile() {
        let p = SpdParams::default();
        assert_eq!(spd_diverted_current(&p, 0.0).unwrap(), 10e-6);
        assert!((p.tau() - 36e-9).abs() < 1e-18);
        let i = spd_diverted_current(&p, 200e-12 + 36e-9).unwrap();
        assert!((i - 10e-6 / std::f64::consts::E).abs() < 1e-12, "{i}");
        assert!(spd_diverted_current(&p, 1e-3).unwrap() < 1e-15);
        assert!(spd_diverted_current(&p, -1e-12).is_err());
        let before = spd_diverted_current(&p, p.hotspot_duration).unwrap();
        let after = spd_diverted_current(&p, p.hotspot_duration * (1.0 + 1e-9)).unwrap();
        assert!((before - after).abs() / before < 1e-3);
    }

    #[test]
    fn spd_validation() {
        SpdParams::default().validate("spd").unwrap();
        let bad = SpdParams {
            recovery_resistance: 1e3,
            ..Default::default()
        };
        assert!(bad.validate("spd").is_err());
    }

    #[test]
    fn amplifier_steps() {
        let n = NtronParams::default();
        assert_eq!(ntron_response(&n, 60e-6), 1e3);
        assert_eq!(ntron_response(&n, 59e-6), 0.0);
        assert_eq!(ntron_response(&n, 0.0), 0.0);
        let h = HtronParams::default();
        let on = HtronResponse {
            resistance: 800e3,
            delay: 1e-9,
            energy: 20e-15,
        };
        assert_eq!(htron_response(&h, 1.2e-3), on);
        assert_eq!(htron_response(&h, 1.3e-3), on);
        assert_eq!(htron_response(&h, 0.0).resistance, 0.0);
    }

    #[test]
    fn led_photon_counts() {
        let led = LedParams::default();
        let p = led_emit(&led, 160e-9, Emission::Expected).unwrap();
        let oracle = ((10e-6 * 160e-9 + 10e-15 * 1.0) / 1.602176634e-19_f64).round() * 1e-3;
        assert_eq!(p.n_photons, oracle.round() as u64);
        assert!((p.n_photons as f64 / 1e4 - 1.0).abs() < 0.01, "{}", p.n_photons);
        let p = led_emit(&led, 3.2e-9, Emission::Expected).unwrap();
        assert!((p.n_photons as i64 - 262).abs() <= 1, "{}", p.n_photons);
        let dark = LedParams {
            quantum_efficiency: 1e-12,
            ..led
        };
        assert_eq!(led_emit(&dark, 1e-9, Emission::Expected).unwrap().n_photons, 0);
        assert!(led_emit(&led, 0.0, Emission::Expected).is_err());
        assert!(led_emit(&led, 1e6, Emission::Expected).is_err());
        let n = led.pulse_duration_for(10_000);
        assert_eq!(led_emit(&led, n, Emission::Expected).unwrap().n_photons, 10_000);
    }

    #[test]
    fn efficiency_reference_points() {
        let m = AmplifierEfficiencyModel::default();
        let led = LedParams::default();
        assert_eq!(amplifier_efficiency(&m, &led, 0), 0.0);
        let eta = amplifier_efficiency(&m, &led, 10_000);
        assert!((eta / 1e-4 - 1.0).abs() < 0.01, "{eta}");
        let asym = m.asymptotic_efficiency(&led);
        assert!((asym / 1e-4 - 1.0).abs() < 0.001, "{asym}");
    }
}
