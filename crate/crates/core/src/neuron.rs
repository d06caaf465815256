//! Neuronal integration loop, thresholding, and the transmitter chain that
//! turns a threshold crossing into a photon pulse.

use serde::{Deserialize, Serialize};

use crate::devices::{
    amplifier_efficiency, htron_response, led_emit, ntron_response, AmplifierEfficiencyModel, Emission,
    HtronParams, LedParams, NtronParams, StageEnergies,
};
use crate::error::{Result, SimError};
use crate::junction::JunctionParams;
use crate::synapse::{ni_contribution, SynapseParams, SynapseState};

/// Shortest LED drive pulse, s.
pub const MIN_PULSE_DURATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicy {
    /// Clear I_ni; SI loops keep their flux.
    #[default]
    ClearNi,
    /// Also empty every SI loop of the neuron.
    PurgeSi,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Transmitter {
    pub ntron: NtronParams,
    pub htron: HtronParams,
    pub led: LedParams,
    pub amplifier: AmplifierEfficiencyModel,
}

impl Transmitter {
    pub fn validate(&self, path: &str) -> Result<()> {
        self.led.validate(&format!("{path}.led"))?;
        self.amplifier.validate(&format!("{path}.amplifier"))?;
        for (field, v) in [
            ("ntron.gate_threshold", self.ntron.gate_threshold),
            ("ntron.channel_current", self.ntron.channel_current),
            ("ntron.on_resistance", self.ntron.on_resistance),
            ("htron.gate_threshold", self.htron.gate_threshold),
            ("htron.on_resistance", self.htron.on_resistance),
            ("htron.switch_time", self.htron.switch_time),
            ("htron.switch_energy", self.htron.switch_energy),
        ] {
            if !(v > 0.0) {
                return Err(SimError::param(format!("{path}.{field}"), "must be > 0"));
            }
        }
        if self.ntron.channel_current < self.htron.gate_threshold {
            return Err(SimError::param(
                format!("{path}.ntron.channel_current"),
                format!(
                    "chain fault: nTron channel current {:e} A cannot switch the hTron (threshold {:e} A)",
                    self.ntron.channel_current, self.htron.gate_threshold
                ),
            ));
        }
        if !(self.ntron.on_resistance < self.htron.on_resistance) {
            return Err(SimError::param(
                format!("{path}.ntron.on_resistance"),
                "must be well below the hTron on-resistance",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuronParams {
    pub ni_inductance: f64,
    pub jth: JunctionParams,
    pub threshold_bias: f64,
    pub synapses: Vec<SynapseParams>,
    pub fanout: u32,
    pub photons_per_synapse: u32,
    pub refractory: f64,
    pub reset: ResetPolicy,
    pub transmitter: Transmitter,
}

impl Default for NeuronParams {
    fn default() -> Self {
        let jth = JunctionParams::with_beta_c(10e-6, 2.0, 0.3);
        Self {
            ni_inductance: 100e-9,
            threshold_bias: 7e-6,
            jth,
            synapses: vec![SynapseParams::default()],
            fanout: 1,
            photons_per_synapse: 10,
            refractory: 50e-9,
            reset: ResetPolicy::ClearNi,
            transmitter: Transmitter::default(),
        }
    }
}

impl NeuronParams {
    /// Photons aimed for per firing, fanout × photons per synapse.
    pub fn target_photons(&self) -> u64 {
        self.fanout as u64 * self.photons_per_synapse as u64
    }

    /// LED drive time that yields the target photon count on average. Small
    /// targets fall below what charging the LED emits by itself; those get
    /// the shortest drive pulse and overshoot the target.
    pub fn pulse_duration(&self) -> f64 {
        self.transmitter
            .led
            .pulse_duration_for(self.target_photons())
            .max(MIN_PULSE_DURATION)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        self.jth.validate(&format!("{path}.jth"))?;
        self.transmitter.validate(&format!("{path}.transmitter"))?;
        if !(self.ni_inductance > 0.0) {
            return Err(SimError::param(format!("{path}.ni_inductance"), "must be > 0"));
        }
        if !(self.threshold_bias >= 0.0 && self.threshold_bias < self.jth.critical_current) {
            return Err(SimError::param(
                format!("{path}.threshold_bias"),
                "must lie in [0, Ic of the threshold junction)",
            ));
        }
        if self.fanout < 1 {
            return Err(SimError::param(format!("{path}.fanout"), "must be >= 1"));
        }
        if self.photons_per_synapse < 1 {
            return Err(SimError::param(format!("{path}.photons_per_synapse"), "must be >= 1"));
        }
        if !(self.refractory >= 0.0) {
            return Err(SimError::param(format!("{path}.refractory"), "must be >= 0"));
        }
        for (k, s) in self.synapses.iter().enumerate() {
            let p = format!("{path}.synapses[{k}]");
            s.validate(&p)?;
            s.check_coupling(self.ni_inductance, &p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub i_ni: f64,
    pub refractory_until: f64,
    pub firing_count: u64,
    pub ledger: StageEnergies,
}

impl Default for NeuronState {
    fn default() -> Self {
        Self {
            i_ni: 0.0,
            refractory_until: f64::NEG_INFINITY,
            firing_count: 0,
            ledger: StageEnergies::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronalFiringEvent {
    /// Threshold crossing.
    pub t: f64,
    /// Light leaves the LED, after the hTron switching delay.
    pub t_emit: f64,
    pub n_photons: u64,
    pub e_amp: f64,
    pub eta_amp: f64,
    pub stages: StageEnergies,
}

/// Recomputes I_ni as the signed sum of all SI-loop couplings.
pub fn integrate_ni(
    state: &NeuronState,
    synapses: &[SynapseState],
    params: &NeuronParams,
    _t: f64,
) -> Result<NeuronState> {
    if synapses.len() != params.synapses.len() {
        return Err(SimError::InvalidParameter {
            path: "neuron.synapses".into(),
            reason: format!("{} states for {} synapses", synapses.len(), params.synapses.len()),
        });
    }
    let mut i_ni = 0.0;
    for (s, p) in synapses.iter().zip(&params.synapses) {
        i_ni += ni_contribution(s, p, params.ni_inductance)?;
    }
    Ok(NeuronState { i_ni, ..*state })
}

/// True when the threshold junction's current reaches Ic outside the
/// refractory window.
pub fn threshold_check(state: &NeuronState, params: &NeuronParams, t: f64) -> bool {
    t >= state.refractory_until && params.threshold_bias + state.i_ni >= params.jth.critical_current
}

/// Runs the transmitter chain once. The relaxation-oscillator junction
/// latches and hands its bias to the nTron gate; the nTron channel current
/// switches the hTron, which drives the LED for the configured pulse.
pub fn fire(
    state: &NeuronState,
    params: &NeuronParams,
    t: f64,
    emission: Emission,
) -> Result<(NeuronState, NeuronalFiringEvent)> {
    let tx = &params.transmitter;
    if ntron_response(&tx.ntron, tx.ntron.gate_threshold) <= 0.0 {
        return Err(SimError::Config("nTron does not switch at its gate threshold".into()));
    }
    let h = htron_response(&tx.htron, tx.ntron.channel_current);
    if h.resistance <= 0.0 {
        return Err(SimError::Config("nTron channel current does not switch the hTron".into()));
    }
    let pulse = led_emit(&tx.led, params.pulse_duration(), emission)?;
    let stages = tx.amplifier.stage_energies(&tx.led, pulse.n_photons);
    let e_amp = stages.total();
    let mut next = *state;
    next.i_ni = 0.0;
    next.refractory_until = t + params.refractory;
    next.firing_count += 1;
    next.ledger += stages;
    Ok((
        next,
        NeuronalFiringEvent {
            t,
            t_emit: t + h.delay,
            n_photons: pulse.n_photons,
            e_amp,
            eta_amp: amplifier_efficiency(&tx.amplifier, &tx.led, pulse.n_photons),
            stages,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_semantics() {
        let p = NeuronParams::default();
        let s = NeuronState::default();
        let high = NeuronParams {
            threshold_bias: 9e-6,
            ..p.clone()
        };
        assert!(!threshold_check(&s, &high, 0.0));
        let i_ni = p.jth.critical_current - p.threshold_bias;
        assert_eq!(p.threshold_bias + i_ni, p.jth.critical_current);
        let at = NeuronState { i_ni, ..s };
        assert!(threshold_check(&at, &p, 0.0));
        let refractory = NeuronState {
            i_ni: 5e-6,
            refractory_until: 1e-9,
            ..s
        };
        assert!(!threshold_check(&refractory, &p, 0.5e-9));
        assert!(threshold_check(&refractory, &p, 1e-9));
    }

    #[test]
    fn fire_photon_counts() {
        for (fanout, want) in [(1000, 10_000), (20, 200)] {
            let p = NeuronParams {
                fanout,
                ..Default::default()
            };
            let (s, e) = fire(&NeuronState::default(), &p, 0.0, Emission::Expected).unwrap();
            assert_eq!(e.n_photons, want);
            assert_eq!(s.refractory_until, 50e-9);
            assert_eq!(s.i_ni, 0.0);
            assert_eq!(e.t_emit, 1e-9);
        }
    }

    #[test]
    fn small_targets_emit_the_charging_floor() {
        let p = NeuronParams::default();
        assert_eq!(p.pulse_duration(), MIN_PULSE_DURATION);
        let (_, e) = fire(&NeuronState::default(), &p, 0.0, Emission::Expected).unwrap();
        let led = &p.transmitter.led;
        let carriers = (led.drive_current * MIN_PULSE_DURATION + led.capacitance * led.drive_voltage)
            / crate::constants::ELECTRON_CHARGE;
        assert_eq!(e.n_photons, (carriers * led.quantum_efficiency).round() as u64);
        assert!(e.n_photons > p.target_photons());
    }

    #[test]
    fn chain_fault_rejected() {
        let mut p = NeuronParams::default();
        p.transmitter.ntron.channel_current = 1e-3;
        let err = p.validate("neuron").unwrap_err().to_string();
        assert!(err.contains("chain fault"), "{err}");
    }
}
