//! Experiment presets. Each writes CSV data files and a JSON summary into
//! the output directory.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::io::Write;

use soen_core::constants::FLUX_QUANTUM;
use soen_core::devices::{amplifier_efficiency, LedParams, SpdState, spd_detect};
use soen_core::junction::{integrate_transient, SolverConfig};
use soen_core::network::presets::DiePreset;
use soen_core::network::{power_report, run_with_threads, Mode, NetworkConfig, SpikeRecord, Stimulus};
use soen_core::synapse::{stdp_event_energy, stdp_update, weight_to_bias, weight_write, Polarity, SpikeOrder, SynapseState};
use soen_core::templates::{J_JTL, J_SF, J_SI, L_SI, L_SPD};

use crate::config::RunConfig;
use crate::output::Outputs;
use crate::CliError;

pub struct ExperimentPreset {
    pub name: &'static str,
    pub description: &'static str,
    /// Tier used when `--mode` is not given.
    pub default_mode: Mode,
    pub default_t_end: f64,
    pub run: fn(&RunConfig, Mode, f64, &mut Outputs) -> Result<(), CliError>,
}

pub const PRESETS: &[ExperimentPreset] = &[
    ExperimentPreset {
        name: "demo-synapse",
        description: "receiver circuit transient for one or more detections (diverted current, J_sf voltage, I_si)",
        default_mode: Mode::Device,
        default_t_end: 42e-9,
        run: demo_synapse,
    },
    ExperimentPreset {
        name: "demo-integration",
        description: "NI-loop current of one neuron as excitatory and inhibitory events arrive",
        default_mode: Mode::Behavioral,
        default_t_end: 300e-9,
        run: demo_integration,
    },
    ExperimentPreset {
        name: "demo-binary",
        description: "supervised binary synapse toggled between weak and strong bias",
        default_mode: Mode::Behavioral,
        default_t_end: 0.0,
        run: demo_binary,
    },
    ExperimentPreset {
        name: "demo-stdp",
        description: "weight steps for pre/post photon pairs at several separations and both orders",
        default_mode: Mode::Behavioral,
        default_t_end: 0.0,
        run: demo_stdp,
    },
    ExperimentPreset {
        name: "efficiency-sweep",
        description: "amplifier-chain efficiency versus photons per pulse over the LED capacitance and efficiency grid",
        default_mode: Mode::Behavioral,
        default_t_end: 0.0,
        run: efficiency_sweep,
    },
    ExperimentPreset {
        name: "power-scale",
        description: "device power of the die-scale network and its wafer-scale extrapolation",
        default_mode: Mode::Behavioral,
        default_t_end: 10e-6,
        run: power_scale,
    },
    ExperimentPreset {
        name: "run-network",
        description: "simulate the network given in the [network] section of the config",
        default_mode: Mode::Behavioral,
        default_t_end: 1e-6,
        run: run_network,
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn sim<T>(r: soen_core::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::from)
}

fn demo_synapse(cfg: &RunConfig, mode: Mode, t_end: f64, out: &mut Outputs) -> Result<(), CliError> {
    let d = &cfg.synapse_demo;
    let mut detections = d.detections.clone();
    detections.sort_by(f64::total_cmp);
    match mode {
        Mode::Device => {
            let circuit = d.receiver.circuit(d.synaptic_bias, 0.0, &detections);
            let solver = SolverConfig { t_end, ..d.solver.clone() };
            let tr = sim(integrate_transient(&circuit, &solver))?;
            let (ls, lsi) = (sim(tr.inductor(L_SPD))?, sim(tr.inductor(L_SI))?);
            let jsf = sim(tr.junction(J_SF))?;
            let bias = d.receiver.spd.bias;
            out.write("synapse_trace.csv", |w| {
                writeln!(w, "time_s,i_diverted_A,v_sf_V,i_si_A")?;
                for k in 0..tr.len() {
                    writeln!(
                        w,
                        "{:e},{:e},{:e},{:e}",
                        tr.time[k],
                        bias - tr.inductor_current[ls][k],
                        tr.voltage[jsf][k],
                        tr.inductor_current[lsi][k]
                    )?;
                }
                Ok(())
            })?;
            out.write("circuit_trace.csv", |w| tr.write_csv(w))?;
            let i_si = sim(tr.final_inductor_current(L_SI))?;
            let slips = [sim(tr.slip_count(J_SF))?, sim(tr.slip_count(J_JTL))?, sim(tr.slip_count(J_SI))?];
            let energy = detections.len() as f64 * d.receiver.spd.detection_energy()
                + slips.iter().map(|s| s.unsigned_abs()).sum::<u64>() as f64 * d.receiver.critical_current * FLUX_QUANTUM;
            out.json(
                "summary.json",
                &json!({
                    "mode": "device",
                    "synaptic_bias_A": d.synaptic_bias,
                    "detections": detections,
                    "fluxons": (i_si * d.receiver.si_inductance / FLUX_QUANTUM).round() as i64,
                    "final_i_si_A": i_si,
                    "slips": {"J_sf": slips[0], "J_jtl": slips[1], "J_si": slips[2]},
                    "energy_J": energy,
                    "max_kcl_residual_A": tr.max_kcl_residual(),
                    "solver_steps": tr.stats.accepted,
                }),
            )
        }
        Mode::Behavioral => {
            let table = &soen_core::templates::ReceiverDefaults::shipped().fluxon_yield;
            let n = sim(table.fluxons_at(d.synaptic_bias))?;
            let spd = &d.receiver.spd;
            let mut state = SpdState::default();
            let mut i_si = 0.0;
            let mut rows = Vec::new();
            for &t in &detections {
                let now = state.advance(spd, t);
                let fired = now.is_armed();
                state = if fired { spd_detect(&now, spd, t, 0.0) } else { now };
                if fired {
                    i_si += n as f64 * FLUX_QUANTUM / d.receiver.si_inductance;
                }
                rows.push((t, fired, i_si));
            }
            out.write("synapse_events.csv", |w| {
                writeln!(w, "time_s,fired,i_si_A")?;
                for (t, f, i) in &rows {
                    writeln!(w, "{t:e},{},{i:e}", u8::from(*f))?;
                }
                Ok(())
            })?;
            out.json(
                "summary.json",
                &json!({
                    "mode": "behavioral",
                    "synaptic_bias_A": d.synaptic_bias,
                    "fluxons_per_event": n,
                    "events": rows.iter().filter(|r| r.1).count(),
                    "final_i_si_A": i_si,
                }),
            )
        }
    }
}

fn write_record(out: &mut Outputs, rec: &SpikeRecord) -> Result<(), CliError> {
    out.write("firings.csv", |w| rec.write_firings_csv(w))?;
    out.write("synaptic_events.csv", |w| rec.write_synaptic_csv(w))?;
    out.write("plasticity_events.csv", |w| rec.write_plasticity_csv(w))?;
    out.write("ni_trace.csv", |w| rec.write_ni_csv(w))?;
    out.write("final_state.csv", |w| rec.write_final_state_csv(w))
}

fn demo_integration(cfg: &RunConfig, mode: Mode, t_end: f64, out: &mut Outputs) -> Result<(), CliError> {
    let d = &cfg.integration_demo;
    let net = NetworkConfig {
        seed: cfg.seed,
        die_area: 1e-6,
        trace_ni: true,
        neurons: vec![d.neuron.clone()],
        initial_weights: vec![d.weights.clone()],
        stimuli: d
            .arrivals
            .iter()
            .map(|&(synapse, t)| Stimulus::Photons { neuron: 0, synapse, times: vec![t] })
            .collect(),
        ..Default::default()
    };
    let rec = sim(run_with_threads(&net, t_end, mode, cfg.threads))?;
    write_record(out, &rec)?;
    out.json(
        "summary.json",
        &json!({
            "mode": mode,
            "counts": rec.counts,
            "energy": rec.energy,
            "final_i_ni_A": rec.ni_trace.last().map(|s| s.i_ni).unwrap_or(0.0),
            "threshold_A": d.neuron.jth.critical_current - d.neuron.threshold_bias,
            "aborted": rec.aborted,
        }),
    )
}

fn demo_binary(cfg: &RunConfig, _mode: Mode, _t_end: f64, out: &mut Outputs) -> Result<(), CliError> {
    let d = &cfg.binary_demo;
    let p = &d.synapse;
    let start = SynapseState::new(0);
    let mut s = start;
    // (t, drive_plus, drive_minus, w)
    let mut rows = vec![(0.0, 0u8, 0u8, s.w)];
    for c in 0..d.cycles {
        for (phase, pol) in [(0.0, Polarity::Potentiate), (0.5, Polarity::Depress)] {
            let t = (c as f64 + phase) * d.period + 0.25 * d.period;
            let (plus, minus) = if pol == Polarity::Potentiate { (1, 0) } else { (0, 1) };
            rows.push((t, 0, 0, s.w));
            rows.push((t, plus, minus, s.w));
            s = weight_write(&s, p, pol);
            rows.push((t + d.pulse_width, plus, minus, s.w));
            rows.push((t + d.pulse_width, 0, 0, s.w));
        }
    }
    rows.push((d.cycles as f64 * d.period, 0, 0, s.w));
    let mut lines = Vec::with_capacity(rows.len());
    for &(t, a, b, w) in &rows {
        lines.push((t, a, b, w, sim(weight_to_bias(p, w))?));
    }
    out.write("binary_synapse.csv", |w| {
        writeln!(w, "time_s,drive_plus,drive_minus,w,i_sy_A")?;
        for (t, a, b, wt, i) in &lines {
            writeln!(w, "{t:e},{a},{b},{wt},{i:e}")?;
        }
        Ok(())
    })?;
    out.json(
        "summary.json",
        &json!({
            "writes": 2 * d.cycles,
            "i_sy_levels_A": (0..p.n_levels).map(|w| weight_to_bias(p, w).unwrap_or(f64::NAN)).collect::<Vec<_>>(),
            "returned_to_start": s == start,
            "energy_per_write_J": p.jj.critical_current * FLUX_QUANTUM,
        }),
    )
}

#[derive(Serialize)]
struct PairRow {
    t_pre: f64,
    t_post: f64,
    w_before: u32,
    w_after: u32,
    i_sy_before: f64,
    i_sy_after: f64,
    energy: f64,
}

fn demo_stdp(cfg: &RunConfig, _mode: Mode, _t_end: f64, out: &mut Outputs) -> Result<(), CliError> {
    let d = &cfg.stdp_demo;
    let p = &d.synapse;
    let mut s = SynapseState::new(d.initial_weight);
    let mut rows = Vec::new();
    for (k, &sep) in d.separations.iter().enumerate() {
        let t_pre = k as f64 * d.spacing + d.spacing / 2.0;
        let t_post = t_pre + sep;
        let order = if sep >= 0.0 { SpikeOrder::PreThenPost } else { SpikeOrder::PostThenPre };
        let next = stdp_update(&s, p, sep.abs(), order);
        let dw = next.w.abs_diff(s.w);
        rows.push(PairRow {
            t_pre,
            t_post,
            w_before: s.w,
            w_after: next.w,
            i_sy_before: sim(weight_to_bias(p, s.w))?,
            i_sy_after: sim(weight_to_bias(p, next.w))?,
            energy: stdp_event_energy(p, dw),
        });
        s = next;
    }
    out.write("stdp_pairs.csv", |w| {
        writeln!(w, "t_pre_s,t_post_s,dt_s,w_before,w_after,i_sy_before_A,i_sy_after_A,energy_J")?;
        for r in &rows {
            writeln!(
                w,
                "{:e},{:e},{:e},{},{},{:e},{:e},{:e}",
                r.t_pre,
                r.t_post,
                r.t_post - r.t_pre,
                r.w_before,
                r.w_after,
                r.i_sy_before,
                r.i_sy_after,
                r.energy
            )?;
        }
        Ok(())
    })?;
    out.json(
        "summary.json",
        &json!({
            "pairs": rows.len(),
            "final_weight": s.w,
            "window_s": p.stdp_window,
            "kernel": p.stdp_kernel,
        }),
    )
}

fn efficiency_sweep(cfg: &RunConfig, _mode: Mode, _t_end: f64, out: &mut Outputs) -> Result<(), CliError> {
    let e = &cfg.efficiency;
    let decades = (e.n_max as f64 / e.n_min as f64).log10();
    let steps = (decades * e.points_per_decade as f64).ceil() as u32;
    let mut ns: Vec<u64> = (0..=steps)
        .map(|k| (e.n_min as f64 * 10f64.powf(k as f64 / e.points_per_decade as f64)).round() as u64)
        .map(|n| n.min(e.n_max))
        .collect();
    ns.dedup();
    let cells: Vec<(f64, f64)> = e
        .capacitances
        .iter()
        .flat_map(|&c| e.quantum_efficiencies.iter().map(move |&q| (c, q)))
        .collect();
    let curves: Vec<(LedParams, Vec<f64>)> = cells
        .par_iter()
        .map(|&(c, q)| {
            let led = LedParams {
                capacitance: c,
                quantum_efficiency: q,
                ..e.led
            };
            let etas = ns.iter().map(|&n| amplifier_efficiency(&e.amplifier, &led, n)).collect();
            (led, etas)
        })
        .collect();
    out.write("efficiency.csv", |w| {
        writeln!(w, "c_led_F,eta_qe,n_photons,eta_amp,log10_eta_amp")?;
        for (led, etas) in &curves {
            for (n, eta) in ns.iter().zip(etas) {
                writeln!(
                    w,
                    "{:e},{:e},{n},{eta:e},{:e}",
                    led.capacitance,
                    led.quantum_efficiency,
                    eta.log10()
                )?;
            }
            // blank line separates curves for gnuplot's `index`
            writeln!(w)?;
        }
        Ok(())
    })?;
    let summary: Vec<_> = curves
        .iter()
        .map(|(led, etas)| {
            let asymptote = e.amplifier.asymptotic_efficiency(led);
            let crossover = ns.iter().zip(etas).find(|(_, &eta)| eta >= asymptote / 2.0).map(|(n, _)| *n);
            json!({
                "c_led_F": led.capacitance,
                "eta_qe": led.quantum_efficiency,
                "asymptote": asymptote,
                "half_asymptote_at_n_photons": crossover,
            })
        })
        .collect();
    out.json("summary.json", &json!({ "curves": summary, "points_per_curve": ns.len() }))
}

fn power_scale(cfg: &RunConfig, mode: Mode, t_end: f64, out: &mut Outputs) -> Result<(), CliError> {
    if mode == Mode::Device {
        return Err(CliError::Config("power-scale runs on the behavioral tier only".into()));
    }
    let die = DiePreset {
        seed: cfg.seed,
        ..cfg.power.die.clone()
    };
    let net = sim(die.build())?;
    let rec = sim(run_with_threads(&net, t_end, Mode::Behavioral, cfg.threads))?;
    let die_power = sim(power_report(&rec, &net, t_end))?;
    out.write("die_firings.csv", |w| rec.write_firings_csv(w))?;

    let mut wafer = cfg.power.wafer.clone();
    wafer.sample.seed = cfg.seed;
    let (_, sample) = sim(wafer.sample_config())?;
    let wrec = sim(run_with_threads(&sample, t_end, Mode::Behavioral, cfg.threads))?;
    let sample_power = sim(power_report(&wrec, &sample, t_end))?;
    let wafer_power = wafer.extrapolate(&sample_power);
    out.json(
        "power.json",
        &json!({
            "window_s": t_end,
            "die": {
                "neurons": die.neurons,
                "synapses": net.edges.len(),
                "report": die_power,
                "counts": rec.counts,
                "cryostat_power_W": die_power.cryostat_power(),
            },
            "wafer": {
                "neurons": wafer.neurons,
                "synapses": wafer.synapses,
                "area_m2": wafer.area(),
                "sample_synapses": sample.edges.len(),
                "sample_report": sample_power,
                "report": wafer_power,
                "cryostat_power_W": wafer_power.cryostat_power(),
            },
        }),
    )
}

fn run_network(cfg: &RunConfig, mode: Mode, t_end: f64, out: &mut Outputs) -> Result<(), CliError> {
    let mut net = cfg
        .network
        .clone()
        .ok_or_else(|| CliError::Config("run-network needs a [network] section in the config".into()))?;
    net.seed = cfg.seed;
    let rec = sim(run_with_threads(&net, t_end, mode, cfg.threads))?;
    write_record(out, &rec)?;
    let power = sim(power_report(&rec, &net, t_end))?;
    out.json(
        "summary.json",
        &json!({
            "mode": mode,
            "t_end_s": t_end,
            "counts": rec.counts,
            "energy": rec.energy,
            "power": power,
            "aborted": rec.aborted,
        }),
    )
}
