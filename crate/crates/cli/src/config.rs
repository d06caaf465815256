//! Run configuration: TOML file, `key=value` overrides, then flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use soen_core::devices::{AmplifierEfficiencyModel, LedParams};
use soen_core::junction::SolverConfig;
use soen_core::network::presets::{DiePreset, WaferPreset};
use soen_core::network::{Mode, NetworkConfig};
use soen_core::neuron::NeuronParams;
use soen_core::synapse::SynapseParams;
use soen_core::templates::{ReceiverDefaults, ReceiverTemplate};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Simulated time; each preset has its own default.
    pub t_end: Option<f64>,
    /// Tier; each preset has its own default.
    pub mode: Option<Mode>,
    /// Worker threads (0: all cores).
    pub threads: usize,
    pub synapse_demo: SynapseDemo,
    pub integration_demo: IntegrationDemo,
    pub binary_demo: BinaryDemo,
    pub stdp_demo: StdpDemo,
    pub efficiency: EfficiencySweep,
    pub power: PowerScale,
    pub network: Option<NetworkConfig>,
}

/// One receiver circuit driven by detections at the listed times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynapseDemo {
    pub synaptic_bias: f64,
    pub detections: Vec<f64>,
    pub receiver: ReceiverTemplate,
    pub solver: SolverConfig,
}

impl Default for SynapseDemo {
    fn default() -> Self {
        let receiver = ReceiverDefaults::shipped().receiver.clone();
        Self {
            synaptic_bias: 1e-6,
            detections: vec![receiver.detection_time],
            receiver,
            solver: SolverConfig::default(),
        }
    }
}

/// A single neuron receiving excitatory and inhibitory events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationDemo {
    pub neuron: NeuronParams,
    /// Initial weight index per synapse.
    pub weights: Vec<u32>,
    /// `(synapse, time)` photon arrivals.
    pub arrivals: Vec<(u32, f64)>,
}

impl Default for IntegrationDemo {
    fn default() -> Self {
        use soen_core::synapse::CouplingSign;
        let exc = SynapseParams::default();
        let inh = SynapseParams {
            sign: CouplingSign::Inhibitory,
            ..SynapseParams::default()
        };
        Self {
            neuron: NeuronParams {
                synapses: vec![exc.clone(), exc.clone(), exc, inh.clone(), inh],
                ..NeuronParams::default()
            },
            weights: vec![0, 1, 1, 0, 1],
            arrivals: vec![(0, 10e-9), (1, 60e-9), (3, 110e-9), (2, 160e-9), (4, 210e-9)],
        }
    }
}

/// Periodic supervised writes alternating potentiate and depress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinaryDemo {
    pub synapse: SynapseParams,
    pub period: f64,
    pub cycles: u32,
    /// Width of the drive pulses (for plotting only), s.
    pub pulse_width: f64,
}

impl Default for BinaryDemo {
    fn default() -> Self {
        Self {
            synapse: SynapseParams::default(),
            period: 1e-9,
            cycles: 5,
            pulse_width: 50e-12,
        }
    }
}

/// Pre/post photon pairs at several separations and both orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StdpDemo {
    pub synapse: SynapseParams,
    pub initial_weight: u32,
    /// Signed separations t_post − t_pre, s.
    pub separations: Vec<f64>,
    /// Time between successive pairs, s.
    pub spacing: f64,
}

impl Default for StdpDemo {
    fn default() -> Self {
        Self {
            synapse: SynapseParams {
                n_levels: 16,
                stdp_step: 3,
                ..SynapseParams::default()
            },
            initial_weight: 8,
            separations: vec![5e-9, 15e-9, 30e-9, 60e-9, -5e-9, -15e-9, -30e-9, -60e-9],
            spacing: 200e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfficiencySweep {
    pub led: LedParams,
    pub amplifier: AmplifierEfficiencyModel,
    pub capacitances: Vec<f64>,
    pub quantum_efficiencies: Vec<f64>,
    pub n_min: u64,
    pub n_max: u64,
    pub points_per_decade: u32,
}

impl Default for EfficiencySweep {
    fn default() -> Self {
        Self {
            led: LedParams::default(),
            amplifier: AmplifierEfficiencyModel::default(),
            capacitances: vec![10e-15, 50e-15, 100e-15],
            quantum_efficiencies: vec![1.0, 1e-1, 1e-2, 1e-3],
            n_min: 1,
            n_max: 10_000_000,
            points_per_decade: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PowerScale {
    pub die: DiePreset,
    pub wafer: WaferPreset,
}

/// Parses `text` (from `origin`) and applies overrides. Parse errors keep
/// the file's line and column.
pub fn parse(text: &str, origin: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    if overrides.is_empty() {
        return toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")));
    }
    let mut table: Table = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    RunConfig::deserialize(Value::Table(table)).map_err(|e| CliError::Config(format!("{origin} with overrides: {e}")))
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            parse(&text, &p.display().to_string(), overrides)
        }
        None => parse("", "defaults", overrides),
    }
}

enum Key<'a> {
    Field(&'a str),
    Index(&'a str, usize),
}

fn split_key(part: &str) -> Result<Key<'_>, CliError> {
    match part.split_once('[') {
        None => Ok(Key::Field(part)),
        Some((name, rest)) => {
            let idx = rest
                .strip_suffix(']')
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Config(format!("bad index in override key `{part}`")))?;
            Ok(Key::Index(name, idx))
        }
    }
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets a dotted path such as `power.die.neurons=100` or
/// `network.neurons[0].fanout=20`, creating tables as needed.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("empty segment in override key `{key}`")));
    }
    let value = parse_value(raw.trim());
    let mut cur = table;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        match split_key(part)? {
            Key::Field(name) if last => {
                cur.insert(name.to_string(), value);
                return Ok(());
            }
            Key::Field(name) => {
                let next = cur.entry(name).or_insert_with(|| Value::Table(Table::new()));
                cur = next
                    .as_table_mut()
                    .ok_or_else(|| CliError::Config(format!("`{name}` in `{key}` is not a table")))?;
            }
            Key::Index(name, idx) => {
                let arr = cur
                    .get_mut(name)
                    .and_then(Value::as_array_mut)
                    .ok_or_else(|| CliError::Config(format!("`{name}` in `{key}` is not an array")))?;
                let len = arr.len();
                let slot = arr
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("index {idx} out of range for `{name}` (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                cur = slot
                    .as_table_mut()
                    .ok_or_else(|| CliError::Config(format!("`{name}[{idx}]` in `{key}` is not a table")))?;
            }
        }
    }
    Ok(())
}

fn note(out: &mut Vec<String>, r: soen_core::Result<()>) {
    if let Err(e) = r {
        out.push(e.to_string());
    }
}

impl RunConfig {
    /// Every invariant violation, each prefixed with its parameter path.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.synapse_demo;
        note(&mut out, s.receiver.validate("synapse_demo.receiver"));
        note(&mut out, s.solver.validate());
        if !(s.synaptic_bias >= 0.0) {
            out.push("invalid parameter `synapse_demo.synaptic_bias`: must be >= 0".into());
        }
        let d = &self.integration_demo;
        note(&mut out, d.neuron.validate("integration_demo.neuron"));
        if d.weights.len() != d.neuron.synapses.len() {
            out.push(format!(
                "invalid parameter `integration_demo.weights`: {} weights for {} synapses",
                d.weights.len(),
                d.neuron.synapses.len()
            ));
        }
        for (k, &(syn, t)) in d.arrivals.iter().enumerate() {
            if syn as usize >= d.neuron.synapses.len() || !(t >= 0.0) {
                out.push(format!("invalid parameter `integration_demo.arrivals[{k}]`: unknown synapse or negative time"));
            }
        }
        note(&mut out, self.binary_demo.synapse.validate("binary_demo.synapse"));
        note(&mut out, self.stdp_demo.synapse.validate("stdp_demo.synapse"));
        if self.stdp_demo.initial_weight >= self.stdp_demo.synapse.n_levels {
            out.push("invalid parameter `stdp_demo.initial_weight`: must be below n_levels".into());
        }
        let e = &self.efficiency;
        note(&mut out, e.led.validate("efficiency.led"));
        note(&mut out, e.amplifier.validate("efficiency.amplifier"));
        if !(e.n_min >= 1 && e.n_max >= e.n_min && e.points_per_decade >= 1) {
            out.push("invalid parameter `efficiency.n_max`: need 1 <= n_min <= n_max and points_per_decade >= 1".into());
        }
        for (k, &c) in e.capacitances.iter().enumerate() {
            if !(c >= 0.0) {
                out.push(format!("invalid parameter `efficiency.capacitances[{k}]`: must be >= 0"));
            }
        }
        for (k, &q) in e.quantum_efficiencies.iter().enumerate() {
            if !(q > 0.0 && q <= 1.0) {
                out.push(format!("invalid parameter `efficiency.quantum_efficiencies[{k}]`: must lie in (0, 1]"));
            }
        }
        note(&mut out, self.power.die.neuron.validate("power.die.neuron"));
        note(&mut out, self.power.wafer.sample.neuron.validate("power.wafer.sample.neuron"));
        if let Some(n) = &self.network {
            for (k, neuron) in n.neurons.iter().enumerate() {
                note(&mut out, neuron.validate(&format!("network.neurons[{k}]")));
            }
            // structural checks (edges, stimuli) once the neurons are sound
            if out.is_empty() {
                if let Err(e) = n.validate() {
                    out.push(e.to_string());
                }
            }
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0) {
                out.push("invalid parameter `t_end`: must be > 0".into());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_clean() {
        assert!(RunConfig::default().violations().is_empty());
        assert_eq!(parse("", "x", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_set_nested_values() {
        let c = parse(
            "seed = 4\n[power.die]\nneurons = 100\n",
            "x",
            &["power.die.neurons=50".into(), "efficiency.capacitances=[1e-15]".into(), "mode=device".into()],
        )
        .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.power.die.neurons, 50);
        assert_eq!(c.efficiency.capacitances, vec![1e-15]);
        assert_eq!(c.mode, Some(Mode::Device));
    }

    #[test]
    fn indexed_override() {
        let text = "[network]\n[[network.neurons]]\nfanout = 3\n";
        let c = parse(text, "x", &["network.neurons[0].fanout=7".into()]).unwrap();
        assert_eq!(c.network.unwrap().neurons[0].fanout, 7);
        assert!(parse(text, "x", &["network.neurons[3].fanout=7".into()]).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("seed = 1\nmode = 3\n", "run.toml", &[]).unwrap_err().to_string();
        assert!(err.contains("run.toml") && err.contains("line 2"), "{err}");
        let err = parse("bogus = 1\n", "run.toml", &[]).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn violations_name_parameter_paths() {
        let mut c = RunConfig::default();
        c.integration_demo.neuron.synapses[0].mutual_inductance = 1e-3;
        c.binary_demo.synapse.jj.critical_current = -1.0;
        let v = c.violations();
        assert!(v.iter().any(|s| s.contains("integration_demo.neuron.synapses[0].mutual_inductance")), "{v:?}");
        assert!(v.iter().any(|s| s.contains("binary_demo.synapse.jj")), "{v:?}");
    }
}
