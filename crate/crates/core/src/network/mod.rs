//! Event-driven simulation of loop neurons connected by photonic edges.

mod engine;
mod power;
pub mod presets;

pub use engine::{run, run_with_threads};
pub use power::{
    one_over_f_rates, power_report, PowerReport, CRYOSTAT_BASE_POWER, CRYOSTAT_POWER_PER_DEVICE_WATT,
};

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Result, SimError};
use crate::junction::SolverConfig;
use crate::neuron::NeuronParams;

/// One waveguide connection from a neuron to a synapse of another neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    /// Index into the target neuron's synapse list.
    pub synapse: u32,
    pub path_length: f64,
    #[serde(default = "one")]
    pub transmission: f64,
}

fn one() -> f64 {
    1.0
}

/// External activity imposed on the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stimulus {
    /// Photons reach `synapse` of `neuron` at the listed times.
    Photons { neuron: u32, synapse: u32, times: Vec<f64> },
    /// Poisson photon arrivals at `rate` on one synapse.
    PoissonPhotons { neuron: u32, synapse: u32, rate: f64 },
    /// The neuron is driven over threshold at the listed times.
    Firing { neuron: u32, times: Vec<f64> },
    /// The neuron is driven over threshold as a Poisson process.
    PoissonFiring { neuron: u32, rate: f64 },
}

impl Stimulus {
    pub fn neuron(&self) -> u32 {
        match self {
            Stimulus::Photons { neuron, .. }
            | Stimulus::PoissonPhotons { neuron, .. }
            | Stimulus::Firing { neuron, .. }
            | Stimulus::PoissonFiring { neuron, .. } => *neuron,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Behavioral,
    /// Every synaptic firing event is simulated with the receiver circuit.
    Device,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionKind {
    #[default]
    Expected,
    Stochastic,
}

/// Largest network accepted in device mode.
pub const DEVICE_MODE_MAX_NEURONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub seed: u64,
    pub die_area: f64,
    pub group_index: f64,
    pub emission: EmissionKind,
    /// When false, neurons fire only when a stimulus forces them; synaptic
    /// events are still processed and accounted.
    pub closed_loop: bool,
    pub plasticity: bool,
    /// Keep every synaptic and plasticity event in the record (counts and
    /// energies are always kept).
    pub log_synaptic_events: bool,
    /// Record I_ni after every change.
    pub trace_ni: bool,
    /// Abort once this many events have been processed.
    pub max_events: u64,
    /// Static bias power added to the report, W.
    pub static_power: f64,
    pub solver: SolverConfig,
    pub neurons: Vec<NeuronParams>,
    pub edges: Vec<Edge>,
    pub stimuli: Vec<Stimulus>,
    /// Starting weight index per neuron and synapse; empty means all zero.
    pub initial_weights: Vec<Vec<u32>>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            die_area: 1e-4,
            group_index: 2.0,
            emission: EmissionKind::Expected,
            closed_loop: true,
            plasticity: false,
            log_synaptic_events: true,
            trace_ni: false,
            max_events: 2_000_000_000,
            static_power: 0.0,
            solver: SolverConfig::default(),
            neurons: Vec::new(),
            edges: Vec::new(),
            stimuli: Vec::new(),
            initial_weights: Vec::new(),
        }
    }
}

impl NetworkConfig {
    pub fn edge_delay(&self, e: &Edge) -> f64 {
        e.path_length * self.group_index / SPEED_OF_LIGHT
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.die_area > 0.0) {
            return Err(SimError::param("network.die_area", "must be > 0"));
        }
        if !(self.group_index >= 1.0) {
            return Err(SimError::param("network.group_index", "must be >= 1"));
        }
        if !(self.static_power >= 0.0) {
            return Err(SimError::param("network.static_power", "must be >= 0"));
        }
        self.solver.validate()?;
        for (k, n) in self.neurons.iter().enumerate() {
            n.validate(&format!("network.neurons[{k}]"))?;
        }
        if !self.initial_weights.is_empty() {
            if self.initial_weights.len() != self.neurons.len() {
                return Err(SimError::param("network.initial_weights", "need one list per neuron"));
            }
            for (k, (ws, n)) in self.initial_weights.iter().zip(&self.neurons).enumerate() {
                if ws.len() != n.synapses.len() {
                    return Err(SimError::param(
                        format!("network.initial_weights[{k}]"),
                        format!("{} weights for {} synapses", ws.len(), n.synapses.len()),
                    ));
                }
                if let Some(j) = ws.iter().zip(&n.synapses).position(|(&w, p)| w >= p.n_levels) {
                    return Err(SimError::param(
                        format!("network.initial_weights[{k}][{j}]"),
                        "must be below the synapse's n_levels",
                    ));
                }
            }
        }
        let mut out_degree = vec![0u32; self.neurons.len()];
        for (k, e) in self.edges.iter().enumerate() {
            let path = format!("network.edges[{k}]");
            let (s, t) = (e.source as usize, e.target as usize);
            if s >= self.neurons.len() || t >= self.neurons.len() {
                return Err(SimError::param(path, "source or target neuron does not exist"));
            }
            if e.synapse as usize >= self.neurons[t].synapses.len() {
                return Err(SimError::param(
                    format!("{path}.synapse"),
                    format!("neuron {t} has {} synapses", self.neurons[t].synapses.len()),
                ));
            }
            if !(e.transmission >= 0.0 && e.transmission <= 1.0) {
                return Err(SimError::param(format!("{path}.transmission"), "must lie in [0, 1]"));
            }
            if !(e.path_length >= 0.0) {
                return Err(SimError::param(format!("{path}.path_length"), "must be >= 0"));
            }
            out_degree[s] += 1;
        }
        for (k, n) in self.neurons.iter().enumerate() {
            if out_degree[k] > 0 && out_degree[k] != n.fanout {
                return Err(SimError::param(
                    format!("network.neurons[{k}].fanout"),
                    format!("is {} but the neuron has {} out-edges", n.fanout, out_degree[k]),
                ));
            }
        }
        for (k, s) in self.stimuli.iter().enumerate() {
            let path = format!("network.stimuli[{k}]");
            let n = s.neuron() as usize;
            if n >= self.neurons.len() {
                return Err(SimError::param(path, "neuron does not exist"));
            }
            match s {
                Stimulus::Photons { synapse, times, .. } => {
                    if *synapse as usize >= self.neurons[n].synapses.len() {
                        return Err(SimError::param(format!("{path}.synapse"), "does not exist"));
                    }
                    check_times(times, &path)?;
                }
                Stimulus::PoissonPhotons { synapse, rate, .. } => {
                    if *synapse as usize >= self.neurons[n].synapses.len() {
                        return Err(SimError::param(format!("{path}.synapse"), "does not exist"));
                    }
                    check_rate(*rate, &path)?;
                }
                Stimulus::Firing { times, .. } => check_times(times, &path)?,
                Stimulus::PoissonFiring { rate, .. } => check_rate(*rate, &path)?,
            }
        }
        Ok(())
    }
}

fn check_times(times: &[f64], path: &str) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(SimError::param(format!("{path}.times"), "must be finite and >= 0"));
    }
    Ok(())
}

fn check_rate(rate: f64, path: &str) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(SimError::param(format!("{path}.rate"), "must be finite and >= 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiringRecord {
    pub neuron: u32,
    pub t: f64,
    pub t_emit: f64,
    pub n_photons: u64,
    pub e_amp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapticRecord {
    pub neuron: u32,
    pub synapse: u32,
    pub t: f64,
    pub n_fluxons: i64,
    pub delta_i_si: f64,
    pub energy: f64,
    pub w: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticityRecord {
    pub neuron: u32,
    pub synapse: u32,
    pub t: f64,
    pub dw: i32,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiSample {
    pub neuron: u32,
    pub t: f64,
    pub i_ni: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub firings: u64,
    pub photon_arrivals: u64,
    pub photons_delivered: u64,
    pub synaptic_events: u64,
    /// Arrivals that found the detector dead.
    pub dead_time_drops: u64,
    pub saturations: u64,
    pub plasticity_events: u64,
    /// Forced firings that fell inside the refractory window.
    pub refractory_drops: u64,
    pub processed: u64,
}

impl std::ops::AddAssign for EventCounts {
    fn add_assign(&mut self, o: Self) {
        self.firings += o.firings;
        self.photon_arrivals += o.photon_arrivals;
        self.photons_delivered += o.photons_delivered;
        self.synaptic_events += o.synaptic_events;
        self.dead_time_drops += o.dead_time_drops;
        self.saturations += o.saturations;
        self.plasticity_events += o.plasticity_events;
        self.refractory_drops += o.refractory_drops;
        self.processed += o.processed;
    }
}

/// Energy spent in each subsystem over a run, J.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTotals {
    pub transmitter: f64,
    pub receiver: f64,
    pub update: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub t_end: f64,
    pub mode: Mode,
    pub firings: Vec<FiringRecord>,
    pub synaptic_events: Vec<SynapticRecord>,
    pub plasticity_events: Vec<PlasticityRecord>,
    pub ni_trace: Vec<NiSample>,
    pub counts: EventCounts,
    pub energy: EnergyTotals,
    /// SI-loop currents at `t_end`, per neuron and synapse.
    pub final_si: Vec<Vec<f64>>,
    pub final_weights: Vec<Vec<u32>>,
    /// Set when the run stopped early; the record holds what was simulated.
    pub aborted: Option<String>,
}

impl SpikeRecord {
    pub fn firing_times(&self, neuron: u32) -> Vec<f64> {
        self.firings.iter().filter(|f| f.neuron == neuron).map(|f| f.t).collect()
    }

    pub fn synaptic_times(&self, neuron: u32) -> Vec<f64> {
        self.synaptic_events
            .iter()
            .filter(|s| s.neuron == neuron)
            .map(|s| s.t)
            .collect()
    }

    /// Firing events as CSV (SI units, shortest round-trip float format).
    pub fn write_firings_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "neuron,t_s,t_emit_s,n_photons,e_amp_J")?;
        for f in &self.firings {
            writeln!(w, "{},{:e},{:e},{},{:e}", f.neuron, f.t, f.t_emit, f.n_photons, f.e_amp)?;
        }
        Ok(())
    }

    pub fn write_synaptic_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "neuron,synapse,t_s,n_fluxons,delta_i_si_A,energy_J,w")?;
        for s in &self.synaptic_events {
            writeln!(
                w,
                "{},{},{:e},{},{:e},{:e},{}",
                s.neuron, s.synapse, s.t, s.n_fluxons, s.delta_i_si, s.energy, s.w
            )?;
        }
        Ok(())
    }

    pub fn write_plasticity_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "neuron,synapse,t_s,dw,energy_J")?;
        for p in &self.plasticity_events {
            writeln!(w, "{},{},{:e},{},{:e}", p.neuron, p.synapse, p.t, p.dw, p.energy)?;
        }
        Ok(())
    }

    pub fn write_ni_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "neuron,t_s,i_ni_A")?;
        for n in &self.ni_trace {
            writeln!(w, "{},{:e},{:e}", n.neuron, n.t, n.i_ni)?;
        }
        Ok(())
    }

    /// Final SI currents and weights, one row per synapse.
    pub fn write_final_state_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "neuron,synapse,i_si_A,w")?;
        for (k, (si, ws)) in self.final_si.iter().zip(&self.final_weights).enumerate() {
            for (j, (i, wt)) in si.iter().zip(ws).enumerate() {
                writeln!(w, "{k},{j},{i:e},{wt}")?;
            }
        }
        Ok(())
    }
}
