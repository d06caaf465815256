//! Fixed device-tier circuit templates.
//!
//! The receiver template converts one detector click into a burst of
//! fluxons stored in the synaptic integration (SI) loop:
//!
//! ```text
//!  I_spd ─► n1 ── r_spd ── n2 ◄─ I_sy          n3 ◄─ I_jtl
//!           │              │                   │
//!         L_spd           J_sf ── L_jtl ───────┤
//!        (hotspot)         │                 J_jtl      n3 ── J_si ── n4
//!           │              │                   │                      │
//!          gnd            gnd                 gnd                    L_si ── gnd
//! ```

use serde::{Deserialize, Serialize};

use crate::constants::FLUX_QUANTUM;
use crate::devices::SpdParams;
use crate::error::{Result, SimError};
use crate::junction::{
    integrate_transient, Drive, JunctionParams, LoopCircuit, ResistancePulse, SolverConfig, Trace,
};

pub const J_SF: &str = "J_sf";
pub const J_JTL: &str = "J_jtl";
pub const J_SI: &str = "J_si";
pub const L_SPD: &str = "L_spd";
pub const L_SI: &str = "L_si";
pub const I_SY: &str = "I_sy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverTemplate {
    pub spd: SpdParams,
    pub critical_current: f64,
    pub beta_c: f64,
    /// Shunt resistance shared by all three junctions. This is the one
    /// parameter fixed by [`calibrate_shunt`].
    pub shunt: f64,
    pub jtl_inductance: f64,
    pub jtl_bias: f64,
    pub si_inductance: f64,
    pub si_resistance: f64,
    /// Rise time of the synaptic and JTL bias ramps starting at t = 0. The
    /// detector starts in its biased steady state.
    pub bias_rise: f64,
    pub detection_time: f64,
    /// Simulated time after the detection.
    pub window: f64,
}

impl Default for ReceiverTemplate {
    fn default() -> Self {
        Self {
            spd: SpdParams::default(),
            critical_current: 10e-6,
            beta_c: 0.3,
            shunt: 130.0,
            jtl_inductance: 200e-12,
            jtl_bias: 9e-6,
            si_inductance: 10e-6,
            si_resistance: 0.0,
            bias_rise: 500e-12,
            detection_time: 2e-9,
            window: 40e-9,
        }
    }
}

/// Result of one simulated detection.
#[derive(Debug, Clone)]
pub struct ReceiverRun {
    pub synaptic_bias: f64,
    /// Fluxons added to the SI loop, from the change in loop current.
    pub fluxons: i64,
    /// 2π slips of each junction after the detection.
    pub sf_slips: i64,
    pub jtl_slips: i64,
    pub si_slips: i64,
    /// Time of the first fluxon entering the SI loop.
    pub first_entry: Option<f64>,
    pub si_current_before: f64,
    pub si_current_after: f64,
    pub trace: Trace,
}

impl ReceiverRun {
    pub fn total_slips(&self) -> i64 {
        self.sf_slips.abs() + self.jtl_slips.abs() + self.si_slips.abs()
    }
}

impl ReceiverTemplate {
    pub fn junction(&self, shunt: f64) -> JunctionParams {
        JunctionParams::with_beta_c(self.critical_current, shunt, self.beta_c)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        self.spd.validate(&format!("{path}.spd"))?;
        self.junction(self.shunt).validate(&format!("{path}.shunt"))?;
        for (field, v) in [
            ("jtl_inductance", self.jtl_inductance),
            ("si_inductance", self.si_inductance),
            ("bias_rise", self.bias_rise),
            ("window", self.window),
        ] {
            if !(v > 0.0) {
                return Err(SimError::param(format!("{path}.{field}"), "must be > 0"));
            }
        }
        if self.detection_time < self.bias_rise {
            return Err(SimError::param(
                format!("{path}.detection_time"),
                "detection must come after the bias ramps",
            ));
        }
        if !(self.si_resistance >= 0.0) || !(self.jtl_bias >= 0.0) {
            return Err(SimError::param(path, "si_resistance and jtl_bias must be >= 0"));
        }
        Ok(())
    }

    /// Circuit with the detector clicking at each time in `detections` and
    /// `si_current` already circulating in the SI loop.
    pub fn circuit(&self, synaptic_bias: f64, si_current: f64, detections: &[f64]) -> LoopCircuit {
        let ramp = |value| Drive::Ramp {
            value,
            rise: self.bias_rise,
        };
        let pulses = detections
            .iter()
            .map(|&start| ResistancePulse {
                start,
                duration: self.spd.hotspot_duration,
                resistance: self.spd.hotspot_resistance,
            })
            .collect();
        LoopCircuit::new("receiver")
            .source("I_spd", 0, 1, Drive::Constant { value: self.spd.bias })
            .lossy_inductor(L_SPD, 1, 0, self.spd.inductance, 0.0, pulses)
            .with_initial_current(L_SPD, self.spd.bias)
            .resistor("r_spd", 1, 2, self.spd.recovery_resistance)
            .source(I_SY, 0, 2, ramp(synaptic_bias))
            .junction(J_SF, 2, 0, self.junction(self.shunt))
            .inductor("L_jtl", 2, 3, self.jtl_inductance)
            .source("I_jtl", 0, 3, ramp(self.jtl_bias))
            .junction(J_JTL, 3, 0, self.junction(self.shunt))
            .junction(J_SI, 3, 4, self.junction(self.shunt))
            .lossy_inductor(L_SI, 4, 0, self.si_inductance, self.si_resistance, Vec::new())
            .with_initial_current(L_SI, si_current)
    }

    /// Simulates one detection at `detection_time` with an empty SI loop.
    pub fn run(&self, synaptic_bias: f64, solver: &SolverConfig) -> Result<ReceiverRun> {
        self.run_from(synaptic_bias, 0.0, solver)
    }

    /// Simulates one detection with `si_current` already stored in the SI
    /// loop and counts the fluxons it adds.
    pub fn run_from(&self, synaptic_bias: f64, si_current: f64, solver: &SolverConfig) -> Result<ReceiverRun> {
        self.validate("receiver")?;
        if !(synaptic_bias >= 0.0) {
            return Err(SimError::param("receiver.synaptic_bias", "must be >= 0"));
        }
        let circuit = self.circuit(synaptic_bias, si_current, &[self.detection_time]);
        let config = SolverConfig {
            t_end: self.detection_time + self.window,
            ..solver.clone()
        };
        let trace = integrate_transient(&circuit, &config)?;
        let t0 = self.detection_time;
        let before = trace.time.iter().rposition(|&t| t <= t0).unwrap_or(0);
        let li = trace.inductor(L_SI)?;
        let si_before = trace.inductor_current[li][before];
        let si_after = trace.final_inductor_current(L_SI)?;
        let after = |name: &str| -> Result<Vec<(f64, i64)>> {
            let j = trace.junction(name)?;
            Ok(trace
                .slips
                .iter()
                .filter(|s| s.junction == j && s.t > t0)
                .map(|s| (s.t, s.direction as i64))
                .collect())
        };
        let jtl = after(J_JTL)?;
        Ok(ReceiverRun {
            synaptic_bias,
            fluxons: ((si_after - si_before) * self.si_inductance / FLUX_QUANTUM).round() as i64,
            sf_slips: after(J_SF)?.iter().map(|s| s.1).sum(),
            jtl_slips: jtl.iter().map(|s| s.1).sum(),
            si_slips: after(J_SI)?.iter().map(|s| s.1).sum(),
            first_entry: jtl.iter().find(|s| s.1 > 0).map(|s| s.0),
            si_current_before: si_before,
            si_current_after: si_after,
            trace,
        })
    }
}

/// Outcome of [`calibrate_shunt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub shunt: f64,
    pub fluxons: i64,
    pub evaluations: usize,
}

/// One-parameter calibration: bisects the shared junction shunt in
/// `[lo, hi]` (geometrically) until one detection at `synaptic_bias` adds
/// `target` fluxons. The fluxon count grows with the shunt, so the bracket
/// must satisfy `n(lo) <= target <= n(hi)`.
pub fn calibrate_shunt(
    base: &ReceiverTemplate,
    synaptic_bias: f64,
    target: i64,
    (lo, hi): (f64, f64),
    solver: &SolverConfig,
) -> Result<Calibration> {
    if !(lo > 0.0 && hi > lo) {
        return Err(SimError::param("calibration.bracket", "need 0 < lo < hi"));
    }
    let mut evaluations = 0;
    let mut count = |r: f64| -> Result<i64> {
        evaluations += 1;
        let t = ReceiverTemplate {
            shunt: r,
            ..base.clone()
        };
        Ok(t.run(synaptic_bias, solver)?.fluxons)
    };
    let (mut a, mut b) = (lo, hi);
    let (na, nb) = (count(a)?, count(b)?);
    if na == target {
        return Ok(Calibration { shunt: a, fluxons: na, evaluations: 2 });
    }
    if nb == target {
        return Ok(Calibration { shunt: b, fluxons: nb, evaluations: 2 });
    }
    if !(na < target && target < nb) {
        return Err(SimError::Domain(format!(
            "calibration bracket does not enclose {target} fluxons: n({a}) = {na}, n({b}) = {nb}"
        )));
    }
    for _ in 0..40 {
        // round to 0.1 Ω so the shipped value is readable
        let mid = ((a * b).sqrt() * 10.0).round() / 10.0;
        if mid <= a || mid >= b {
            break;
        }
        let n = count(mid)?;
        if n == target {
            return Ok(Calibration { shunt: mid, fluxons: n, evaluations });
        }
        if n < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Err(SimError::Domain(format!(
        "no shunt in [{lo}, {hi}] gives exactly {target} fluxons (closest bracket [{a}, {b}])"
    )))
}

/// Runs the template at each bias and tabulates fluxons per detection.
pub fn fluxon_anchors(template: &ReceiverTemplate, biases: &[f64], solver: &SolverConfig) -> Result<Vec<(f64, i64)>> {
    biases
        .iter()
        .map(|&b| Ok((b, template.run(b, solver)?.fluxons)))
        .collect()
}

/// How the shipped shunt value was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub synaptic_bias: f64,
    pub target_fluxons: i64,
    pub bracket: (f64, f64),
}

/// Contents of the shipped receiver parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverDefaults {
    pub format_version: u32,
    pub receiver: ReceiverTemplate,
    pub calibration: CalibrationRecord,
    pub fluxon_yield: crate::synapse::FluxonYield,
}

pub const RECEIVER_DEFAULTS_TOML: &str = include_str!("../params/receiver.toml");

impl ReceiverDefaults {
    pub fn parse(text: &str) -> Result<Self> {
        let d: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        if d.format_version != 1 {
            return Err(SimError::Config(format!(
                "unsupported receiver parameter format_version {}",
                d.format_version
            )));
        }
        d.receiver.validate("receiver")?;
        d.fluxon_yield.validate("fluxon_yield")?;
        Ok(d)
    }

    /// The parameter file compiled into the crate.
    pub fn shipped() -> &'static ReceiverDefaults {
        static CELL: std::sync::OnceLock<ReceiverDefaults> = std::sync::OnceLock::new();
        CELL.get_or_init(|| Self::parse(RECEIVER_DEFAULTS_TOML).expect("shipped receiver parameters are valid"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_code_defaults() {
        let d = ReceiverDefaults::shipped();
        assert_eq!(d.receiver, ReceiverTemplate::default());
        assert_eq!(d.calibration.target_fluxons, 33);
    }

    #[test]
    fn circuit_is_valid() {
        let t = ReceiverTemplate::default();
        t.circuit(1e-6, 0.0, &[2e-9]).validate().unwrap();
        assert!(ReceiverTemplate {
            detection_time: 0.0,
            ..t.clone()
        }
        .validate("r")
        .is_err());
    }

    #[test]
    fn no_detection_no_fluxons() {
        let t = ReceiverTemplate {
            window: 5e-9,
            ..Default::default()
        };
        let tr = integrate_transient(
            &t.circuit(3e-6, 0.0, &[]),
            &SolverConfig {
                t_end: 7e-9,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(tr.slips.is_empty());
    }
}
