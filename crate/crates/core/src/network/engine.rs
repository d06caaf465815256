use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp};
use rayon::prelude::*;

use super::{
    EmissionKind, EnergyTotals, EventCounts, FiringRecord, Mode, NetworkConfig, NiSample, PlasticityRecord,
    SpikeRecord, Stimulus, SynapticRecord, DEVICE_MODE_MAX_NEURONS,
};
use crate::constants::FLUX_QUANTUM;
use crate::devices::Emission;
use crate::error::{Result, SimError};
use crate::neuron::{fire, integrate_ni, threshold_check, NeuronParams, NeuronState, ResetPolicy};
use crate::rng::{derive_seed, stream_rng};
use crate::synapse::{
    pair_update, si_decay, stdp_event_energy, synaptic_fire, weight_to_bias, PairRole, SpikeOrder, SynapseParams,
    SynapseState, SynapticFiringEvent,
};
use crate::templates::{ReceiverDefaults, ReceiverTemplate};

const TAG_ARRIVAL: u64 = 0x4152_5249_5641_4c00;
const TAG_STIMULUS: u64 = 0x5354_494d_0000_0000;
const TAG_EMISSION: u64 = 0x454d_4954_0000_0000;

#[derive(Debug, Clone, Copy)]
enum Kind {
    Arrival { edge: u32, photons: u64 },
    Stimulus { index: u32, k: u64 },
    Recheck,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    /// Tie-break keys: originating neuron, edge (or stimulus slot), sequence.
    src: u32,
    slot: u64,
    seq: u64,
    target: u32,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> Ordering {
        self.t
            .total_cmp(&o.t)
            .then(self.src.cmp(&o.src))
            .then(self.slot.cmp(&o.slot))
            .then(self.seq.cmp(&o.seq))
    }
}

/// Read-only data shared by all shards.
struct Shared<'a> {
    cfg: &'a NetworkConfig,
    mode: Mode,
    out_offsets: Vec<usize>,
    out_edges: Vec<u32>,
    delays: Vec<f64>,
    stimuli: Vec<Stimulus>,
    receivers: Vec<Vec<ReceiverTemplate>>,
}

#[derive(Default)]
struct Shard {
    state: NeuronState,
    synapses: Vec<SynapseState>,
    synapse_t: Vec<f64>,
    recheck_at: Option<f64>,
    stim_rngs: Vec<(u32, ChaCha8Rng)>,
    counts: EventCounts,
    energy: EnergyTotals,
    firings: Vec<FiringRecord>,
    synaptic: Vec<SynapticRecord>,
    plasticity: Vec<PlasticityRecord>,
    ni: Vec<NiSample>,
}

/// Runs the network to `t_end` on the default thread pool.
pub fn run(config: &NetworkConfig, t_end: f64, mode: Mode) -> Result<SpikeRecord> {
    run_with_threads(config, t_end, mode, 0)
}

/// Runs the network with `threads` workers (0: rayon default, 1: serial).
/// The record is bit-identical for every thread count.
pub fn run_with_threads(config: &NetworkConfig, t_end: f64, mode: Mode, threads: usize) -> Result<SpikeRecord> {
    if threads == 1 {
        return simulate(config, t_end, mode, false);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if threads > 1 {
        builder = builder.num_threads(threads);
    }
    let pool = builder
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    pool.install(|| simulate(config, t_end, mode, true))
}

fn simulate(cfg: &NetworkConfig, t_end: f64, mode: Mode, parallel: bool) -> Result<SpikeRecord> {
    cfg.validate()?;
    if !(t_end > 0.0) {
        return Err(SimError::param("t_end", "must be > 0"));
    }
    if mode == Mode::Device && cfg.neurons.len() > DEVICE_MODE_MAX_NEURONS {
        return Err(SimError::Config(format!(
            "device mode is limited to {DEVICE_MODE_MAX_NEURONS} neurons (network has {})",
            cfg.neurons.len()
        )));
    }
    let n = cfg.neurons.len();
    let mut out_offsets = vec![0usize; n + 1];
    for e in &cfg.edges {
        out_offsets[e.source as usize + 1] += 1;
    }
    for k in 0..n {
        out_offsets[k + 1] += out_offsets[k];
    }
    let mut fill = out_offsets.clone();
    let mut out_edges = vec![0u32; cfg.edges.len()];
    for (k, e) in cfg.edges.iter().enumerate() {
        out_edges[fill[e.source as usize]] = k as u32;
        fill[e.source as usize] += 1;
    }
    let delays: Vec<f64> = cfg.edges.iter().map(|e| cfg.edge_delay(e)).collect();
    let emit_delay = cfg
        .neurons
        .iter()
        .map(|p| p.transmitter.htron.switch_time)
        .fold(f64::INFINITY, f64::min);
    let lookahead = delays.iter().copied().fold(f64::INFINITY, f64::min) + emit_delay;

    let mut stimuli = cfg.stimuli.clone();
    for s in &mut stimuli {
        if let Stimulus::Photons { times, .. } | Stimulus::Firing { times, .. } = s {
            times.sort_by(f64::total_cmp);
        }
    }
    let receivers = if mode == Mode::Device {
        cfg.neurons
            .iter()
            .map(|p| p.synapses.iter().map(receiver_for).collect())
            .collect()
    } else {
        Vec::new()
    };
    let shared = Shared {
        cfg,
        mode,
        out_offsets,
        out_edges,
        delays,
        stimuli,
        receivers,
    };

    let mut shards: Vec<Shard> = cfg
        .neurons
        .iter()
        .enumerate()
        .map(|(k, p)| Shard {
            synapses: (0..p.synapses.len())
                .map(|j| SynapseState::new(cfg.initial_weights.get(k).map_or(0, |w| w[j])))
                .collect(),
            synapse_t: vec![0.0; p.synapses.len()],
            ..Default::default()
        })
        .collect();

    let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    for (k, s) in shared.stimuli.iter().enumerate() {
        let owner = s.neuron() as usize;
        let mut rng = stream_rng(derive_seed(cfg.seed, TAG_STIMULUS), k as u64);
        if let Some(t) = stimulus_time(s, 0, 0.0, &mut rng) {
            heap.push(Reverse(stimulus_event(&shared, k, 0, t)));
        }
        shards[owner].stim_rngs.push((k as u32, rng));
    }

    let mut aborted = None;
    let mut processed = 0u64;
    while let Some(Reverse(first)) = heap.peek().copied() {
        if first.t > t_end {
            break;
        }
        if processed >= cfg.max_events {
            aborted = Some(format!(
                "event budget of {} exhausted at t = {:e} s",
                cfg.max_events, first.t
            ));
            break;
        }
        let t0 = first.t;
        let window_end = t0 + lookahead;
        let mut batch = Vec::new();
        while let Some(Reverse(e)) = heap.peek() {
            let inside = e.t < window_end || e.t == t0;
            if !inside || e.t > t_end {
                break;
            }
            batch.push(heap.pop().unwrap().0);
        }
        processed += batch.len() as u64;
        // group by owning neuron, keeping event order inside each group
        batch.sort_by(|a, b| a.target.cmp(&b.target).then(a.cmp(b)));
        let mut groups: Vec<(u32, Vec<Event>, Shard)> = Vec::new();
        for e in batch {
            match groups.last_mut() {
                Some(g) if g.0 == e.target => g.1.push(e),
                _ => groups.push((e.target, vec![e], std::mem::take(&mut shards[e.target as usize]))),
            }
        }
        let step = |(neuron, events, shard): &mut (u32, Vec<Event>, Shard)| -> Result<Vec<Event>> {
            process_neuron(&shared, *neuron, shard, std::mem::take(events), window_end, lookahead, t_end)
        };
        let produced: Vec<Result<Vec<Event>>> = if parallel && groups.len() > 1 {
            groups.par_iter_mut().map(step).collect()
        } else {
            groups.iter_mut().map(step).collect()
        };
        for (neuron, _, shard) in groups {
            shards[neuron as usize] = shard;
        }
        for out in produced {
            for e in out? {
                heap.push(Reverse(e));
            }
        }
    }

    let mut record = SpikeRecord {
        t_end,
        mode,
        firings: Vec::new(),
        synaptic_events: Vec::new(),
        plasticity_events: Vec::new(),
        ni_trace: Vec::new(),
        counts: EventCounts::default(),
        energy: EnergyTotals::default(),
        final_si: Vec::with_capacity(n),
        final_weights: Vec::with_capacity(n),
        aborted,
    };
    let t_final = if record.aborted.is_some() {
        heap.peek().map(|e| e.0.t).unwrap_or(t_end).min(t_end)
    } else {
        t_end
    };
    for (k, mut s) in shards.into_iter().enumerate() {
        let params = &cfg.neurons[k];
        for j in 0..s.synapses.len() {
            let dt = (t_final - s.synapse_t[j]).max(0.0);
            s.synapses[j] = si_decay(&s.synapses[j], &params.synapses[j], dt)?;
        }
        s.counts.processed = 0;
        record.counts += s.counts;
        record.energy.transmitter += s.energy.transmitter;
        record.energy.receiver += s.energy.receiver;
        record.energy.update += s.energy.update;
        record.final_si.push(s.synapses.iter().map(|x| x.i_si).collect());
        record.final_weights.push(s.synapses.iter().map(|x| x.w).collect());
        record.firings.append(&mut s.firings);
        record.synaptic_events.append(&mut s.synaptic);
        record.plasticity_events.append(&mut s.plasticity);
        record.ni_trace.append(&mut s.ni);
    }
    record.counts.processed = processed;
    record
        .firings
        .sort_by(|a, b| a.t.total_cmp(&b.t).then(a.neuron.cmp(&b.neuron)));
    record.synaptic_events.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then(a.neuron.cmp(&b.neuron))
            .then(a.synapse.cmp(&b.synapse))
    });
    record.plasticity_events.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then(a.neuron.cmp(&b.neuron))
            .then(a.synapse.cmp(&b.synapse))
    });
    record
        .ni_trace
        .sort_by(|a, b| a.t.total_cmp(&b.t).then(a.neuron.cmp(&b.neuron)));
    Ok(record)
}

/// Receiver circuit matching a synapse's detector, junction and SI loop.
fn receiver_for(p: &SynapseParams) -> ReceiverTemplate {
    let base = &ReceiverDefaults::shipped().receiver;
    ReceiverTemplate {
        spd: p.spd,
        critical_current: p.jj.critical_current,
        beta_c: p.jj.beta_c(),
        shunt: p.jj.shunt_resistance,
        si_inductance: p.si_inductance,
        si_resistance: p.si_resistance,
        ..base.clone()
    }
}

fn stimulus_event(shared: &Shared, index: usize, k: u64, t: f64) -> Event {
    Event {
        t,
        src: shared.stimuli[index].neuron(),
        slot: shared.cfg.edges.len() as u64 + index as u64,
        seq: k,
        target: shared.stimuli[index].neuron(),
        kind: Kind::Stimulus { index: index as u32, k },
    }
}

/// Time of the `k`-th occurrence of a stimulus, given the previous one.
fn stimulus_time(s: &Stimulus, k: u64, prev: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
    match s {
        Stimulus::Photons { times, .. } | Stimulus::Firing { times, .. } => times.get(k as usize).copied(),
        Stimulus::PoissonPhotons { rate, .. } | Stimulus::PoissonFiring { rate, .. } => {
            if *rate <= 0.0 {
                return None;
            }
            let gap: f64 = Exp::new(*rate).ok()?.sample(rng);
            Some(prev + gap)
        }
    }
}

struct Ctx<'a, 's> {
    shared: &'a Shared<'s>,
    neuron: u32,
    params: &'a NeuronParams,
    out: Vec<Event>,
    local: BinaryHeap<Reverse<Event>>,
    window_end: f64,
    lookahead: f64,
    t_end: f64,
}

impl Ctx<'_, '_> {
    fn schedule(&mut self, e: Event) {
        if e.t > self.t_end {
            // beyond the horizon; dropping keeps the queue small
            return;
        }
        let local = e.target == self.neuron && (e.t < self.window_end || (self.lookahead <= 0.0 && e.t == self.window_end));
        if local {
            self.local.push(Reverse(e));
        } else {
            self.out.push(e);
        }
    }
}

fn process_neuron(
    shared: &Shared,
    neuron: u32,
    shard: &mut Shard,
    events: Vec<Event>,
    window_end: f64,
    lookahead: f64,
    t_end: f64,
) -> Result<Vec<Event>> {
    let mut ctx = Ctx {
        shared,
        neuron,
        params: &shared.cfg.neurons[neuron as usize],
        out: Vec::new(),
        local: events.into_iter().map(Reverse).collect(),
        window_end,
        lookahead,
        t_end,
    };
    while let Some(Reverse(e)) = ctx.local.pop() {
        handle(&mut ctx, shard, e)?;
    }
    Ok(ctx.out)
}

fn handle(ctx: &mut Ctx, shard: &mut Shard, e: Event) -> Result<()> {
    let cfg = ctx.shared.cfg;
    match e.kind {
        Kind::Arrival { edge, photons } => {
            shard.counts.photon_arrivals += 1;
            let ed = &cfg.edges[edge as usize];
            let syn = ed.synapse as usize;
            let det_eff = ctx.params.synapses[syn].spd.detection_efficiency;
            let mut rng = stream_rng(derive_seed(cfg.seed ^ TAG_ARRIVAL, edge as u64), e.seq);
            let delivered = thin(photons, ed.transmission, &mut rng)?;
            shard.counts.photons_delivered += delivered;
            let detected = thin(delivered, det_eff, &mut rng)?;
            if delivered > 0 {
                photon_at_synapse(ctx, shard, syn, e.t, detected > 0)?;
            }
        }
        Kind::Stimulus { index, k } => {
            let s = &ctx.shared.stimuli[index as usize];
            let pos = shard
                .stim_rngs
                .iter()
                .position(|(i, _)| *i == index)
                .expect("stimulus rng lives with its neuron");
            match s {
                Stimulus::Photons { synapse, .. } | Stimulus::PoissonPhotons { synapse, .. } => {
                    let syn = *synapse as usize;
                    let det_eff = ctx.params.synapses[syn].spd.detection_efficiency;
                    let detected = shard.stim_rngs[pos].1.random::<f64>() < det_eff;
                    photon_at_synapse(ctx, shard, syn, e.t, detected)?;
                }
                Stimulus::Firing { .. } | Stimulus::PoissonFiring { .. } => {
                    if e.t >= shard.state.refractory_until {
                        fire_neuron(ctx, shard, e.t)?;
                    } else {
                        shard.counts.refractory_drops += 1;
                    }
                }
            }
            let rng = &mut shard.stim_rngs[pos].1;
            if let Some(t) = stimulus_time(s, k + 1, e.t, rng) {
                ctx.schedule(stimulus_event(ctx.shared, index as usize, k + 1, t));
            }
        }
        Kind::Recheck => {
            if shard.recheck_at == Some(e.t) {
                shard.recheck_at = None;
                update_ni(ctx, shard, e.t)?;
                check_and_fire(ctx, shard, e.t)?;
            }
        }
    }
    Ok(())
}

fn thin(n: u64, p: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    if p >= 1.0 || n == 0 {
        return Ok(n);
    }
    if p <= 0.0 {
        return Ok(0);
    }
    Ok(Binomial::new(n, p)
        .map_err(|e| SimError::Domain(e.to_string()))?
        .sample(rng))
}

fn decay_to(ctx: &Ctx, shard: &mut Shard, syn: usize, t: f64) -> Result<()> {
    let dt = (t - shard.synapse_t[syn]).max(0.0);
    if dt > 0.0 {
        shard.synapses[syn] = si_decay(&shard.synapses[syn], &ctx.params.synapses[syn], dt)?;
        shard.synapse_t[syn] = t;
    }
    Ok(())
}

fn photon_at_synapse(ctx: &mut Ctx, shard: &mut Shard, syn: usize, t: f64, detected: bool) -> Result<()> {
    let cfg = ctx.shared.cfg;
    let sp = &ctx.params.synapses[syn];
    decay_to(ctx, shard, syn, t)?;
    if cfg.plasticity {
        let dt = t - shard.synapses[syn].t_last_post;
        if dt < sp.stdp_window {
            plasticity_event(ctx, shard, syn, t, dt, SpikeOrder::PostThenPre);
        }
        shard.synapses[syn].t_last_pre = t;
    }
    if !detected {
        return Ok(());
    }
    let before = shard.synapses[syn];
    let spd_now = before.spd.advance(&sp.spd, t);
    if !spd_now.is_armed() {
        shard.synapses[syn].spd = spd_now;
        shard.counts.dead_time_drops += 1;
        return Ok(());
    }
    let (next, ev) = match ctx.shared.mode {
        Mode::Behavioral => synaptic_fire(&before, sp, t)?,
        Mode::Device => device_fire(ctx, &before, syn, t)?,
    };
    shard.synapses[syn] = SynapseState {
        t_last_pre: before.t_last_pre,
        ..next
    };
    shard.counts.synaptic_events += 1;
    if ev.saturated {
        shard.counts.saturations += 1;
    }
    shard.energy.receiver += ev.energy;
    if cfg.log_synaptic_events {
        shard.synaptic.push(SynapticRecord {
            neuron: ctx.neuron,
            synapse: syn as u32,
            t: ev.t,
            n_fluxons: ev.n_fluxons,
            delta_i_si: ev.delta_i_si,
            energy: ev.energy,
            w: before.w,
        });
    }
    update_ni(ctx, shard, t)?;
    check_and_fire(ctx, shard, t)
}

/// Synaptic firing event computed with the receiver circuit.
fn device_fire(ctx: &Ctx, state: &SynapseState, syn: usize, t: f64) -> Result<(SynapseState, SynapticFiringEvent)> {
    let sp = &ctx.params.synapses[syn];
    let (armed_next, _) = synaptic_fire(state, sp, t)?;
    let template = &ctx.shared.receivers[ctx.neuron as usize][syn];
    let i_sy = weight_to_bias(sp, state.w)?;
    let run = template.run_from(i_sy, state.i_si, &ctx.shared.cfg.solver)?;
    let offset = run.first_entry.map(|x| x - template.detection_time).unwrap_or(0.0);
    let n = run.fluxons;
    let next = SynapseState {
        i_si: run.si_current_after,
        ..armed_next
    };
    Ok((
        next,
        SynapticFiringEvent {
            t: t + offset,
            n_fluxons: n,
            delta_i_si: run.si_current_after - run.si_current_before,
            energy: sp.spd.detection_energy() + run.total_slips() as f64 * sp.jj.critical_current * FLUX_QUANTUM,
            saturated: false,
        },
    ))
}

fn update_ni(ctx: &Ctx, shard: &mut Shard, t: f64) -> Result<()> {
    for j in 0..shard.synapses.len() {
        decay_to(ctx, shard, j, t)?;
    }
    let i_ni = integrate_ni(&shard.state, &shard.synapses, ctx.params, t)?.i_ni;
    // I_ni stays cleared until the refractory window ends
    if t >= shard.state.refractory_until {
        shard.state.i_ni = i_ni;
    }
    if ctx.shared.cfg.trace_ni {
        shard.ni.push(NiSample {
            neuron: ctx.neuron,
            t,
            i_ni: shard.state.i_ni,
        });
    }
    Ok(())
}

fn check_and_fire(ctx: &mut Ctx, shard: &mut Shard, t: f64) -> Result<()> {
    if !ctx.shared.cfg.closed_loop {
        return Ok(());
    }
    if threshold_check(&shard.state, ctx.params, t) {
        fire_neuron(ctx, shard, t)?;
    }
    Ok(())
}

fn fire_neuron(ctx: &mut Ctx, shard: &mut Shard, t: f64) -> Result<()> {
    let cfg = ctx.shared.cfg;
    let index = shard.state.firing_count;
    let emission = match cfg.emission {
        EmissionKind::Expected => Emission::Expected,
        EmissionKind::Stochastic => Emission::Stochastic {
            seed: derive_seed(cfg.seed ^ TAG_EMISSION, ctx.neuron as u64),
            stream: index,
        },
    };
    let (state, ev) = fire(&shard.state, ctx.params, t, emission)?;
    shard.state = state;
    shard.counts.firings += 1;
    shard.energy.transmitter += ev.e_amp;
    shard.firings.push(FiringRecord {
        neuron: ctx.neuron,
        t,
        t_emit: ev.t_emit,
        n_photons: ev.n_photons,
        e_amp: ev.e_amp,
    });
    if ctx.params.reset == ResetPolicy::PurgeSi {
        for s in &mut shard.synapses {
            s.i_si = 0.0;
        }
    }
    if cfg.trace_ni {
        shard.ni.push(NiSample {
            neuron: ctx.neuron,
            t,
            i_ni: 0.0,
        });
    }
    if cfg.plasticity {
        for j in 0..shard.synapses.len() {
            let dt = t - shard.synapses[j].t_last_pre;
            if dt < ctx.params.synapses[j].stdp_window {
                plasticity_event(ctx, shard, j, t, dt, SpikeOrder::PreThenPost);
            }
            shard.synapses[j].t_last_post = t;
        }
    }

    let (a, b) = (
        ctx.shared.out_offsets[ctx.neuron as usize],
        ctx.shared.out_offsets[ctx.neuron as usize + 1],
    );
    let fanout = (b - a) as u64;
    if let (Some(per), Some(extra)) = (ev.n_photons.checked_div(fanout), ev.n_photons.checked_rem(fanout)) {
        for (i, &edge) in ctx.shared.out_edges[a..b].iter().enumerate() {
            let ed = &cfg.edges[edge as usize];
            let photons = per + u64::from((i as u64) < extra);
            ctx.schedule(Event {
                t: ev.t_emit + ctx.shared.delays[edge as usize],
                src: ctx.neuron,
                slot: edge as u64,
                seq: index,
                target: ed.target,
                kind: Kind::Arrival { edge, photons },
            });
        }
    }
    if cfg.closed_loop {
        let at = shard.state.refractory_until;
        shard.recheck_at = Some(at);
        ctx.schedule(Event {
            t: at,
            src: ctx.neuron,
            slot: u64::MAX,
            seq: index,
            target: ctx.neuron,
            kind: Kind::Recheck,
        });
    }
    Ok(())
}

fn plasticity_event(ctx: &Ctx, shard: &mut Shard, syn: usize, t: f64, dt: f64, order: SpikeOrder) {
    let sp = &ctx.params.synapses[syn];
    let before = shard.synapses[syn];
    let role = match order {
        SpikeOrder::PreThenPost => PairRole::Hebbian,
        SpikeOrder::PostThenPre => PairRole::AntiHebbian,
    };
    let after = pair_update(&before, sp, role, dt, order);
    let dw = after.w as i32 - before.w as i32;
    let energy = stdp_event_energy(sp, dw.unsigned_abs());
    shard.synapses[syn] = after;
    shard.counts.plasticity_events += 1;
    shard.energy.update += energy;
    if ctx.shared.cfg.log_synaptic_events {
        shard.plasticity.push(PlasticityRecord {
            neuron: ctx.neuron,
            synapse: syn as u32,
            t,
            dw,
            energy,
        });
    }
}
