//! Network presets: die-scale and wafer-scale power studies and a small
//! two-neuron instance.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{one_over_f_rates, Edge, NetworkConfig, PowerReport, Stimulus};
use crate::error::{Result, SimError};
use crate::neuron::NeuronParams;
use crate::rng::{derive_seed, stream_rng};

const TAG_FANOUT: u64 = 0x4641_4e4f;
const TAG_TARGETS: u64 = 0x5441_5247;

/// Neurons on a square grid, each firing as a Poisson process at a rate
/// drawn from the 1/f distribution, with log-uniform fanout to random
/// targets. Waveguide length is the Manhattan distance between sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiePreset {
    pub neurons: usize,
    /// Die edge length, m.
    pub side: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub fanout_min: u32,
    pub fanout_max: u32,
    /// Multiplies every sampled fanout (rounded, at least `fanout_min`).
    pub fanout_scale: f64,
    pub seed: u64,
    pub neuron: NeuronParams,
}

impl Default for DiePreset {
    fn default() -> Self {
        Self {
            neurons: 8100,
            side: 0.01,
            f_min: 100.0,
            f_max: 20e6,
            fanout_min: 20,
            fanout_max: 1000,
            fanout_scale: 1.0,
            seed: 0,
            neuron: NeuronParams::default(),
        }
    }
}

impl DiePreset {
    pub fn fanouts(&self) -> Vec<u32> {
        let mut rng = stream_rng(derive_seed(self.seed, TAG_FANOUT), 0);
        let (lo, hi) = (self.fanout_min as f64, self.fanout_max as f64);
        let cap = (self.neurons.saturating_sub(1)) as u32;
        (0..self.neurons)
            .map(|_| {
                let u: f64 = rng.random();
                let f = (lo * (hi / lo).powf(u) * self.fanout_scale).round() as u32;
                f.max(self.fanout_min).min(cap).max(1)
            })
            .collect()
    }

    pub fn rates(&self) -> Result<Vec<f64>> {
        one_over_f_rates(self.neurons, self.f_min, self.f_max, self.seed)
    }

    pub fn build(&self) -> Result<NetworkConfig> {
        if self.neurons < 2 {
            return Err(SimError::param("die.neurons", "need at least two neurons"));
        }
        if !(self.fanout_min >= 1 && self.fanout_max >= self.fanout_min) {
            return Err(SimError::param("die.fanout_min", "need 1 <= fanout_min <= fanout_max"));
        }
        let per_row = (self.neurons as f64).sqrt().ceil() as usize;
        let pitch = self.side / per_row as f64;
        let site = |k: usize| ((k % per_row) as f64 * pitch, (k / per_row) as f64 * pitch);
        let fanouts = self.fanouts();
        let rates = self.rates()?;

        let mut neurons = Vec::with_capacity(self.neurons);
        let mut edges = Vec::with_capacity(fanouts.iter().map(|&f| f as usize).sum());
        let mut stimuli = Vec::with_capacity(self.neurons);
        for (k, &fanout) in fanouts.iter().enumerate() {
            neurons.push(NeuronParams {
                fanout,
                ..self.neuron.clone()
            });
            let mut rng = stream_rng(derive_seed(self.seed, TAG_TARGETS), k as u64);
            let (x0, y0) = site(k);
            for idx in sample(&mut rng, self.neurons - 1, fanout as usize).into_iter() {
                let target = if idx >= k { idx + 1 } else { idx };
                let (x1, y1) = site(target);
                edges.push(Edge {
                    source: k as u32,
                    target: target as u32,
                    synapse: 0,
                    path_length: (x1 - x0).abs() + (y1 - y0).abs(),
                    transmission: 1.0,
                });
            }
            stimuli.push(Stimulus::PoissonFiring {
                neuron: k as u32,
                rate: rates[k],
            });
        }
        Ok(NetworkConfig {
            seed: self.seed,
            die_area: self.side * self.side,
            closed_loop: false,
            plasticity: false,
            log_synaptic_events: false,
            neurons,
            edges,
            stimuli,
            ..Default::default()
        })
    }
}

/// Wafer-scale extrapolation: a die-sized sample with the wafer's mean
/// fanout is simulated and its power is scaled to the full neuron count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaferPreset {
    pub neurons: f64,
    pub synapses: f64,
    pub diameter: f64,
    pub sample: DiePreset,
}

impl Default for WaferPreset {
    fn default() -> Self {
        let sample = DiePreset::default();
        Self {
            neurons: 1e6,
            synapses: 2e8,
            diameter: 0.3,
            sample,
        }
    }
}

impl WaferPreset {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }

    /// Sample die whose fanouts are rescaled to the wafer's synapses per
    /// neuron.
    pub fn sample_config(&self) -> Result<(DiePreset, NetworkConfig)> {
        let raw = DiePreset {
            fanout_scale: 1.0,
            ..self.sample.clone()
        };
        let mean = raw.fanouts().iter().map(|&f| f as f64).sum::<f64>() / raw.neurons as f64;
        let die = DiePreset {
            fanout_scale: self.synapses / self.neurons / mean,
            ..raw
        };
        let cfg = die.build()?;
        Ok((die, cfg))
    }

    pub fn extrapolate(&self, sample: &PowerReport) -> PowerReport {
        sample.scaled(self.neurons / self.sample.neurons as f64, self.area())
    }
}

/// Neuron 0 connects to synapse 0 of neuron 1 over `path_length`; neuron 0
/// is forced to fire at each of `fire_at`.
pub fn two_neuron(path_length: f64, transmission: f64, fire_at: Vec<f64>) -> NetworkConfig {
    let neuron = NeuronParams::default();
    NetworkConfig {
        die_area: 1e-6,
        neurons: vec![neuron.clone(), neuron],
        edges: vec![Edge {
            source: 0,
            target: 1,
            synapse: 0,
            path_length,
            transmission,
        }],
        stimuli: vec![Stimulus::Firing {
            neuron: 0,
            times: fire_at,
        }],
        ..Default::default()
    }
}
