//! Behavioral synapse: weight-dependent fluxon yield, SI-loop storage and
//! leak, supervised and spike-timing-dependent weight updates, and coupling
//! into the neuronal integration loop.

use serde::{Deserialize, Serialize};

use crate::constants::FLUX_QUANTUM;
use crate::devices::{spd_detect, SpdParams, SpdState};
use crate::error::{Result, SimError};
use crate::junction::JunctionParams;
use crate::templates::ReceiverDefaults;

/// Fluxons (and junction slips) added per detection as a function of the
/// synaptic bias. Rows come from device-tier runs of the receiver template;
/// between rows the count is interpolated linearly and rounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxonYield {
    pub bias: Vec<f64>,
    pub fluxons: Vec<i64>,
    /// Total 2π slips over all receiver junctions for the same detection.
    pub slips: Vec<i64>,
}

impl Default for FluxonYield {
    fn default() -> Self {
        ReceiverDefaults::shipped().fluxon_yield.clone()
    }
}

impl FluxonYield {
    pub fn validate(&self, path: &str) -> Result<()> {
        let n = self.bias.len();
        if n < 2 || self.fluxons.len() != n || self.slips.len() != n {
            return Err(SimError::param(
                path,
                "needs at least two rows and equal-length bias/fluxons/slips",
            ));
        }
        if self.bias.windows(2).any(|w| !(w[1] > w[0])) || !(self.bias[0] >= 0.0) {
            return Err(SimError::param(format!("{path}.bias"), "must be non-negative and strictly increasing"));
        }
        if self.fluxons.windows(2).any(|w| w[1] < w[0]) || self.fluxons[0] < 0 {
            return Err(SimError::param(format!("{path}.fluxons"), "must be non-negative and non-decreasing"));
        }
        if self.slips.iter().zip(&self.fluxons).any(|(s, f)| s < f) {
            return Err(SimError::param(format!("{path}.slips"), "each row needs at least one slip per fluxon"));
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.bias[0], self.bias[self.bias.len() - 1])
    }

    fn interpolate(&self, bias: f64, column: &[i64]) -> Result<i64> {
        let (lo, hi) = self.range();
        let slack = 1e-9 * hi;
        if !(bias >= lo - slack && bias <= hi + slack) {
            return Err(SimError::OutOfRange {
                what: "synaptic bias",
                value: bias,
                lo,
                hi,
            });
        }
        let b = bias.clamp(lo, hi);
        let k = self.bias.partition_point(|&x| x <= b).clamp(1, self.bias.len() - 1);
        let (x0, x1) = (self.bias[k - 1], self.bias[k]);
        let (y0, y1) = (column[k - 1] as f64, column[k] as f64);
        Ok((y0 + (y1 - y0) * (b - x0) / (x1 - x0)).round() as i64)
    }

    /// Fluxons stored per detection at bias `i_sy`.
    pub fn fluxons_at(&self, i_sy: f64) -> Result<i64> {
        self.interpolate(i_sy, &self.fluxons)
    }

    pub fn slips_at(&self, i_sy: f64) -> Result<i64> {
        self.interpolate(i_sy, &self.slips)
    }
}

/// Fluxons per detection at `i_sy` for the shipped table.
pub fn fluxon_yield(i_sy: f64) -> Result<i64> {
    ReceiverDefaults::shipped().fluxon_yield.fluxons_at(i_sy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSign {
    Excitatory,
    Inhibitory,
}

impl CouplingSign {
    pub fn factor(self) -> f64 {
        match self {
            CouplingSign::Excitatory => 1.0,
            CouplingSign::Inhibitory => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum StdpKernel {
    /// `max(0, 1 - dt / window)`.
    Linear,
    /// `exp(-dt / tau)`, cut off at the window.
    Exponential { tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynapseParams {
    pub spd: SpdParams,
    /// Synaptic firing junction.
    pub jj: JunctionParams,
    pub si_inductance: f64,
    pub si_resistance: f64,
    pub mutual_inductance: f64,
    pub sign: CouplingSign,
    pub n_levels: u32,
    pub i_sy_min: f64,
    pub i_sy_max: f64,
    pub stdp_window: f64,
    pub stdp_step: u32,
    pub stdp_kernel: StdpKernel,
    pub fluxon_yield: FluxonYield,
}

impl Default for SynapseParams {
    fn default() -> Self {
        let r = &ReceiverDefaults::shipped().receiver;
        Self {
            spd: r.spd,
            jj: r.junction(r.shunt),
            si_inductance: r.si_inductance,
            si_resistance: r.si_resistance,
            mutual_inductance: DEFAULT_MUTUAL_INDUCTANCE,
            sign: CouplingSign::Excitatory,
            n_levels: 2,
            i_sy_min: 1e-6,
            i_sy_max: 3e-6,
            stdp_window: 50e-9,
            stdp_step: 1,
            stdp_kernel: StdpKernel::Linear,
            fluxon_yield: FluxonYield::default(),
        }
    }
}

/// Default M_sy: a strong (3 µA) event from the shipped yield table moves
/// the NI current by about 1% of a 10 µA threshold junction with
/// L_ni = 100 nH.
pub const DEFAULT_MUTUAL_INDUCTANCE: f64 = 360e-9;

impl SynapseParams {
    /// τ_si; infinite for a lossless loop.
    pub fn tau_si(&self) -> f64 {
        if self.si_resistance == 0.0 {
            f64::INFINITY
        } else {
            self.si_inductance / self.si_resistance
        }
    }

    /// Fluxons the SI loop can hold, L_si·Ic/Φ0.
    pub fn capacity(&self) -> f64 {
        self.si_inductance * self.jj.critical_current / FLUX_QUANTUM
    }

    /// Largest SI-loop current, capacity·Φ0/L_si.
    pub fn max_si_current(&self) -> f64 {
        self.capacity() * FLUX_QUANTUM / self.si_inductance
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        self.spd.validate(&format!("{path}.spd"))?;
        self.jj.validate(&format!("{path}.jj"))?;
        self.fluxon_yield.validate(&format!("{path}.fluxon_yield"))?;
        if !(self.si_inductance > 0.0) {
            return Err(SimError::param(format!("{path}.si_inductance"), "must be > 0"));
        }
        if !(self.si_resistance >= 0.0) {
            return Err(SimError::param(format!("{path}.si_resistance"), "must be >= 0"));
        }
        if self.n_levels < 2 {
            return Err(SimError::param(format!("{path}.n_levels"), "must be >= 2"));
        }
        if !(self.i_sy_min < self.i_sy_max) {
            return Err(SimError::param(format!("{path}.i_sy_min"), "must be below i_sy_max"));
        }
        let (lo, hi) = self.fluxon_yield.range();
        if self.i_sy_min < lo * (1.0 - 1e-9) || self.i_sy_max > hi * (1.0 + 1e-9) {
            return Err(SimError::param(
                format!("{path}.i_sy_max"),
                format!("bias range must lie inside the fluxon-yield table [{lo:e}, {hi:e}] A"),
            ));
        }
        if !(self.stdp_window > 0.0) {
            return Err(SimError::param(format!("{path}.stdp_window"), "must be > 0"));
        }
        if let StdpKernel::Exponential { tau } = self.stdp_kernel {
            if !(tau > 0.0) {
                return Err(SimError::param(format!("{path}.stdp_kernel.tau"), "must be > 0"));
            }
        }
        let strongest = self.fluxon_yield.fluxons_at(self.i_sy_max)?;
        if self.capacity() < strongest as f64 {
            return Err(SimError::param(
                format!("{path}.si_inductance"),
                "SI loop cannot hold the fluxons of one strong event",
            ));
        }
        Ok(())
    }

    /// Checks |M_sy| ≤ sqrt(L_si·L_ni).
    pub fn check_coupling(&self, ni_inductance: f64, path: &str) -> Result<()> {
        let bound = (self.si_inductance * ni_inductance).sqrt();
        if !(self.mutual_inductance.abs() <= bound) {
            return Err(SimError::param(
                format!("{path}.mutual_inductance"),
                format!("|M| = {:e} H exceeds sqrt(L_si L_ni) = {bound:e} H", self.mutual_inductance),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapseState {
    pub i_si: f64,
    pub w: u32,
    pub spd: SpdState,
    pub t_last_pre: f64,
    pub t_last_post: f64,
}

impl SynapseState {
    pub fn new(w: u32) -> Self {
        Self {
            i_si: 0.0,
            w,
            spd: SpdState::default(),
            t_last_pre: f64::NEG_INFINITY,
            t_last_post: f64::NEG_INFINITY,
        }
    }
}

impl Default for SynapseState {
    fn default() -> Self {
        Self::new(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapticFiringEvent {
    pub t: f64,
    pub n_fluxons: i64,
    pub delta_i_si: f64,
    pub energy: f64,
    /// The SI loop was full and fewer fluxons than the yield were stored.
    pub saturated: bool,
}

pub fn weight_to_bias(params: &SynapseParams, w: u32) -> Result<f64> {
    if w >= params.n_levels {
        return Err(SimError::OutOfRange {
            what: "weight index",
            value: w as f64,
            lo: 0.0,
            hi: (params.n_levels - 1) as f64,
        });
    }
    let step = (params.i_sy_max - params.i_sy_min) / (params.n_levels - 1) as f64;
    Ok(params.i_sy_min + w as f64 * step)
}

/// A photon detection at the synapse at time `t`. While the detector is
/// dead the event is empty.
pub fn synaptic_fire(
    state: &SynapseState,
    params: &SynapseParams,
    t: f64,
) -> Result<(SynapseState, SynapticFiringEvent)> {
    let spd = state.spd.advance(&params.spd, t);
    let mut next = SynapseState {
        spd,
        t_last_pre: t,
        ..*state
    };
    if !spd.is_armed() {
        let empty = SynapticFiringEvent {
            t,
            n_fluxons: 0,
            delta_i_si: 0.0,
            energy: 0.0,
            saturated: false,
        };
        return Ok((next, empty));
    }
    next.spd = spd_detect(&spd, &params.spd, t, 0.0);

    let i_sy = weight_to_bias(params, state.w)?;
    let yield_n = params.fluxon_yield.fluxons_at(i_sy)?;
    let quantum = FLUX_QUANTUM / params.si_inductance;
    let headroom = ((params.max_si_current() - state.i_si) / quantum + 1e-9).floor().max(0.0) as i64;
    let n = yield_n.min(headroom);
    // a full loop rejects the surplus through J_si, one more switching each
    let slips = params.fluxon_yield.slips_at(i_sy)? + (yield_n - n);
    next.i_si = state.i_si + n as f64 * quantum;
    let event = SynapticFiringEvent {
        t,
        n_fluxons: n,
        delta_i_si: n as f64 * quantum,
        energy: params.spd.detection_energy() + slips as f64 * params.jj.switching_energy(),
        saturated: n < yield_n,
    };
    Ok((next, event))
}

/// SI-loop leak over `dt`.
pub fn si_decay(state: &SynapseState, params: &SynapseParams, dt: f64) -> Result<SynapseState> {
    if !(dt >= 0.0) {
        return Err(SimError::Domain(format!("negative decay interval {dt:e} s")));
    }
    let mut next = *state;
    if params.si_resistance > 0.0 {
        next.i_si *= (-dt / params.tau_si()).exp();
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Potentiate,
    Depress,
}

/// Supervised write: one step up or down, clamped at the ends.
pub fn weight_write(state: &SynapseState, params: &SynapseParams, polarity: Polarity) -> SynapseState {
    let w = match polarity {
        Polarity::Potentiate => (state.w + 1).min(params.n_levels - 1),
        Polarity::Depress => state.w.saturating_sub(1),
    };
    SynapseState { w, ..*state }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeOrder {
    PreThenPost,
    PostThenPre,
}

/// The two detector pairs of the plasticity circuit. Each one only reacts
/// to photons arriving in its own order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRole {
    Hebbian,
    AntiHebbian,
}

/// Weight-step magnitude for a pre/post separation `dt`.
pub fn stdp_magnitude(params: &SynapseParams, dt: f64) -> u32 {
    if !(dt >= 0.0) || dt >= params.stdp_window {
        return 0;
    }
    let k = match params.stdp_kernel {
        StdpKernel::Linear => 1.0 - dt / params.stdp_window,
        StdpKernel::Exponential { tau } => (-dt / tau).exp(),
    };
    (params.stdp_step as f64 * k).round() as u32
}

/// Response of one detector pair to a photon pair separated by `dt`.
pub fn pair_update(
    state: &SynapseState,
    params: &SynapseParams,
    role: PairRole,
    dt: f64,
    order: SpikeOrder,
) -> SynapseState {
    let m = stdp_magnitude(params, dt);
    let w = match (role, order) {
        (PairRole::Hebbian, SpikeOrder::PreThenPost) => (state.w + m).min(params.n_levels - 1),
        (PairRole::AntiHebbian, SpikeOrder::PostThenPre) => state.w.saturating_sub(m),
        _ => state.w,
    };
    SynapseState { w, ..*state }
}

/// Both pairs together: potentiation for pre-then-post, depression for
/// post-then-pre.
pub fn stdp_update(state: &SynapseState, params: &SynapseParams, dt: f64, order: SpikeOrder) -> SynapseState {
    let s = pair_update(state, params, PairRole::Hebbian, dt, order);
    pair_update(&s, params, PairRole::AntiHebbian, dt, order)
}

/// Energy of one plasticity event: both detectors of the pair click and the
/// storage loop gains or loses `|dw|` fluxons.
pub fn stdp_event_energy(params: &SynapseParams, dw: u32) -> f64 {
    2.0 * params.spd.detection_energy() + dw as f64 * params.jj.switching_energy()
}

/// Current this synapse induces in the NI loop, sign·(M_sy/L_ni)·I_si.
pub fn ni_contribution(state: &SynapseState, params: &SynapseParams, ni_inductance: f64) -> Result<f64> {
    params.check_coupling(ni_inductance, "synapse")?;
    Ok(params.sign.factor() * params.mutual_inductance / ni_inductance * state.i_si)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_levels() {
        let p = SynapseParams::default();
        assert_eq!(weight_to_bias(&p, 0).unwrap(), 1e-6);
        assert_eq!(weight_to_bias(&p, 1).unwrap(), 3e-6);
        assert!(weight_to_bias(&p, 2).is_err());
        let p3 = SynapseParams { n_levels: 3, ..p };
        assert!((weight_to_bias(&p3, 1).unwrap() - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn yield_table_lookup() {
        let y = FluxonYield::default();
        assert_eq!(y.fluxons_at(1e-6).unwrap(), 33);
        assert_eq!(y.fluxons_at(4e-6).unwrap(), 179);
        // halfway between the 1.0 and 1.25 µA rows
        assert_eq!(y.fluxons_at(1.125e-6).unwrap(), 40);
        assert!(y.fluxons_at(0.5e-6).is_err());
        assert!(y.fluxons_at(4.5e-6).is_err());
    }

    #[test]
    fn dead_detector_gives_empty_event() {
        let p = SynapseParams::default();
        let (s, e) = synaptic_fire(&SynapseState::new(0), &p, 0.0).unwrap();
        assert_eq!(e.n_fluxons, 33);
        let (s2, e2) = synaptic_fire(&s, &p, 100e-12).unwrap();
        assert_eq!(e2.n_fluxons, 0);
        assert_eq!(e2.energy, 0.0);
        assert_eq!(s2.i_si, s.i_si);
    }

    #[test]
    fn si_current_quanta() {
        let p = SynapseParams::default();
        let (_, e) = synaptic_fire(&SynapseState::new(0), &p, 0.0).unwrap();
        assert!((e.delta_i_si - 33.0 * FLUX_QUANTUM / 10e-6).abs() < 1e-20);
        assert!((e.delta_i_si - 6.82e-9).abs() < 0.01e-9);
    }

    #[test]
    fn hebbian_pair_ignores_reverse_order() {
        let p = SynapseParams::default();
        let s = SynapseState::new(0);
        assert_eq!(pair_update(&s, &p, PairRole::Hebbian, 0.0, SpikeOrder::PostThenPre), s);
        assert_eq!(pair_update(&s, &p, PairRole::Hebbian, 0.0, SpikeOrder::PreThenPost).w, 1);
    }

    #[test]
    fn coupling_bound() {
        let p = SynapseParams {
            mutual_inductance: 2e-6,
            ..Default::default()
        };
        assert!(ni_contribution(&SynapseState::default(), &p, 100e-9).is_err());
    }
}
