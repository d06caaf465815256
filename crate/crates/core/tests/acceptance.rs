//! Exit-gate acceptance checks. Runs as a plain binary so every criterion
//! prints its verdict line; exits non-zero when any criterion fails.
//! Pass criterion numbers as arguments to run a subset.

use std::time::{Duration, Instant};

use soen_core::constants::{ELECTRON_CHARGE, FLUX_QUANTUM, PLANCK};
use soen_core::devices::{amplifier_efficiency, AmplifierEfficiencyModel, Emission, LedParams};
use soen_core::junction::{
    integrate_transient, loop_storage_capacity, Drive, JunctionParams, LoopCircuit, SolverConfig,
};
use soen_core::network::presets::{two_neuron, DiePreset, WaferPreset};
use soen_core::network::{power_report, run, run_with_threads, EmissionKind, Mode, NetworkConfig, SpikeRecord};
use soen_core::neuron::{fire, NeuronParams, NeuronState};
use soen_core::synapse::{
    fluxon_yield, si_decay, stdp_magnitude, stdp_update, synaptic_fire, weight_to_bias, weight_write, pair_update,
    PairRole, Polarity, SpikeOrder, SynapseParams, SynapseState,
};
use soen_core::templates::{calibrate_shunt, ReceiverDefaults, ReceiverTemplate};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_runtime(start: Instant, limit: Duration) -> std::result::Result<(), String> {
    let e = start.elapsed();
    ensure(e < limit, format!("runtime {e:.1?} exceeds {limit:?}"))
}

fn rsj_oracle(ic: f64, r: f64, i: f64) -> f64 {
    r * (i * i - ic * ic).sqrt()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let (ic, r) = (10e-6, 2.0);
    let jj = JunctionParams {
        critical_current: ic,
        shunt_resistance: r,
        capacitance: 0.0,
        hysteretic: false,
    };
    let mut worst = 0.0f64;
    for ratio in [1.01, 1.02, 1.05, 1.1, 1.25, 1.5, 2.0, 2.5, 3.0] {
        let bias = ratio * ic;
        let v_exact = rsj_oracle(ic, r, bias);
        // at least a dozen periods
        let t_end = (12.0 * FLUX_QUANTUM / v_exact).max(1e-9);
        let c = LoopCircuit::new("rsj")
            .junction("J", 1, 0, jj)
            .source("Ib", 0, 1, Drive::Constant { value: bias });
        let tr = integrate_transient(&c, &SolverConfig { t_end, ..Default::default() }).map_err(|e| e.to_string())?;
        let v = tr.mean_voltage("J").map_err(|e| e.to_string())?;
        let err = (v / v_exact - 1.0).abs();
        worst = worst.max(err);
        ensure(err < 0.01, format!("I = {ratio}·Ic: {v:e} V vs {v_exact:e} V ({:.3}%)", err * 100.0))?;
    }
    within_runtime(start, Duration::from_secs(10))?;
    Ok(format!("worst relative error {:.4}% in {:.1?}", worst * 100.0, start.elapsed()))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let solver = SolverConfig::default();
    let defaults = ReceiverDefaults::shipped();
    let cal = &defaults.calibration;
    let base = ReceiverTemplate {
        shunt: f64::NAN,
        ..defaults.receiver.clone()
    };
    let c = calibrate_shunt(&base, cal.synaptic_bias, cal.target_fluxons, cal.bracket, &solver)
        .map_err(|e| e.to_string())?;
    ensure(
        c.shunt == defaults.receiver.shunt,
        format!("calibration gives {} Ω but {} Ω ships", c.shunt, defaults.receiver.shunt),
    )?;
    let t = ReceiverTemplate {
        shunt: c.shunt,
        ..defaults.receiver.clone()
    };
    let biases = [0.8e-6, 1e-6, 1.25e-6, 1.5e-6, 2e-6, 2.5e-6, 3e-6, 3.5e-6, 4e-6];
    let mut counts = Vec::new();
    for &b in &biases {
        counts.push(t.run(b, &solver).map_err(|e| e.to_string())?.fluxons);
    }
    let at = |b: f64| counts[biases.iter().position(|&x| x == b).unwrap()];
    let (n1, n3) = (at(1e-6), at(3e-6));
    let table: Vec<String> = biases
        .iter()
        .zip(&counts)
        .map(|(b, n)| format!("{:.2}µA:{n}", b * 1e6))
        .collect();
    let summary = format!("R = {} Ω; {}", c.shunt, table.join(" "));
    ensure((n1 - 33).abs() <= 4, format!("n(1 µA) = {n1}, want 33 ± 4; {summary}"))?;
    ensure(counts.windows(2).all(|w| w[0] <= w[1]), format!("device counts not monotone; {summary}"))?;
    let mut prev = 0;
    for k in 0..=320 {
        let b = 0.8e-6 + k as f64 * 1e-8;
        let n = fluxon_yield(b).map_err(|e| e.to_string())?;
        ensure(n >= prev, format!("fluxon_yield decreases at {b:e} A"))?;
        prev = n;
    }
    ensure((n3 - 497).abs() <= 50, format!("n(3 µA) = {n3}, want 497 ± 50; {summary}"))?;
    within_runtime(start, Duration::from_secs(120))?;
    Ok(format!("{summary} in {:.1?}", start.elapsed()))
}

fn criterion_3() -> Check {
    let p = SynapseParams::default();
    let spd_term = 0.5 * 72e-9 * 10e-6 * 10e-6;
    let e_spd = p.spd.detection_energy();
    ensure(
        (e_spd - spd_term).abs() <= 1e-15 * spd_term,
        format!("SPD term {e_spd:e} J, want {spd_term:e} J"),
    )?;
    let (lo, hi) = (6e-18 * 0.75, 45e-18 * 1.25);
    let mut energies = Vec::new();
    // behavioral events at both weights, from empty to nearly full loop
    for w in 0..p.n_levels {
        let mut s = SynapseState::new(w);
        for k in 0..2000 {
            let (next, ev) = synaptic_fire(&s, &p, k as f64 * 1e-6).map_err(|e| e.to_string())?;
            energies.push(ev.energy);
            s = next;
        }
    }
    // device-tier events
    let t = ReceiverTemplate::default();
    let solver = SolverConfig::default();
    for w in 0..p.n_levels {
        let b = weight_to_bias(&p, w).map_err(|e| e.to_string())?;
        let r = t.run(b, &solver).map_err(|e| e.to_string())?;
        energies.push(e_spd + r.total_slips() as f64 * 10e-6 * FLUX_QUANTUM);
    }
    let (min, max) = energies
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    ensure(
        min >= lo && max <= hi,
        format!("event energies span [{:.2}, {:.2}] aJ outside [{:.2}, {:.2}] aJ", min * 1e18, max * 1e18, lo * 1e18, hi * 1e18),
    )?;
    Ok(format!(
        "{} events in [{:.2}, {:.2}] aJ; SPD term {:.3} aJ",
        energies.len(),
        min * 1e18,
        max * 1e18,
        e_spd * 1e18
    ))
}

fn criterion_4() -> Check {
    let lossy = SynapseParams {
        si_resistance: 1e3,
        ..Default::default()
    };
    let tau = 10e-6 / 1e3;
    let s0 = SynapseState {
        i_si: 5e-6,
        ..SynapseState::new(0)
    };
    let s1 = si_decay(&s0, &lossy, tau).map_err(|e| e.to_string())?;
    let ratio = s1.i_si / s0.i_si;
    let want = (-1.0f64).exp();
    ensure((ratio / want - 1.0).abs() < 1e-3, format!("behavioral ratio {ratio} vs 1/e"))?;

    // the same loop integrated as a circuit
    let c = LoopCircuit::new("rl")
        .inductor("L", 1, 0, 10e-6)
        .with_initial_current("L", 5e-6)
        .resistor("R", 1, 0, 1e3);
    let tr = integrate_transient(
        &c,
        &SolverConfig {
            t_end: tau,
            dt_max: 10e-12,
            rel_tol: 1e-7,
            abs_tol: 1e-14,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let dev = tr.final_inductor_current("L").map_err(|e| e.to_string())? / 5e-6;
    ensure((dev / want - 1.0).abs() < 1e-3, format!("circuit ratio {dev} vs 1/e"))?;

    let lossless = SynapseParams::default();
    ensure(lossless.si_resistance == 0.0, "default SI loop is not lossless")?;
    let s2 = si_decay(&s0, &lossless, 1e-3).map_err(|e| e.to_string())?;
    ensure(s2.i_si == s0.i_si, format!("r_si = 0 decayed to {:e}", s2.i_si))?;
    Ok(format!(
        "I(τ)/I0 = {ratio:.6} (behavioral), {dev:.6} (circuit); lossless loop unchanged over 1 ms"
    ))
}

fn criterion_5() -> Check {
    let cap = loop_storage_capacity(10e-6, 10e-6).map_err(|e| e.to_string())?;
    let oracle = 10e-6 * 10e-6 * 2.0 * ELECTRON_CHARGE / PLANCK;
    ensure((cap / 4.84e4 - 1.0).abs() < 0.01, format!("capacity {cap}"))?;
    ensure((cap / oracle - 1.0).abs() < 1e-12, format!("capacity {cap} vs L·Ic/Φ0 = {oracle}"))?;
    let p = SynapseParams::default();
    let i_max = cap * FLUX_QUANTUM / 10e-6;
    let mut s = SynapseState::new(p.n_levels - 1);
    let mut steps = Vec::new();
    let mut saturated_at = None;
    for k in 0..100_000u64 {
        let (next, ev) = synaptic_fire(&s, &p, k as f64 * 1e-6).map_err(|e| e.to_string())?;
        if ev.saturated && saturated_at.is_none() {
            saturated_at = Some(k);
        }
        if !ev.saturated {
            steps.push(ev.delta_i_si);
        }
        s = next;
        if saturated_at.is_some() && k > saturated_at.unwrap() + 10 {
            break;
        }
    }
    let k_sat = saturated_at.ok_or("SI loop never saturated")?;
    let step = steps[0];
    ensure(steps.iter().all(|&d| d == step), "increments before saturation are unequal")?;
    ensure(s.i_si <= i_max * (1.0 + 1e-12), format!("I_si {:e} above the cap {i_max:e}", s.i_si))?;
    ensure(i_max - s.i_si < step, format!("I_si {:e} more than one event below {i_max:e}", s.i_si))?;
    Ok(format!(
        "capacity {cap:.1} fluxons; saturated after {k_sat} events at {:.4} µA (cap {:.4} µA)",
        s.i_si * 1e6,
        i_max * 1e6
    ))
}

fn criterion_6() -> Check {
    let p = SynapseParams::default();
    let s0 = SynapseState::new(0);
    let up = weight_write(&s0, &p, Polarity::Potentiate);
    let b0 = weight_to_bias(&p, s0.w).map_err(|e| e.to_string())?;
    let b1 = weight_to_bias(&p, up.w).map_err(|e| e.to_string())?;
    ensure(b0 == 1e-6 && b1 == 3e-6, format!("biases {b0:e} / {b1:e}"))?;
    let down = weight_write(&up, &p, Polarity::Depress);
    ensure(down == s0, "depress does not undo potentiate")?;
    ensure(weight_write(&up, &p, Polarity::Potentiate) == up, "potentiate at the top is not a no-op")?;
    ensure(weight_write(&s0, &p, Polarity::Depress) == s0, "depress at the bottom is not a no-op")?;
    let mut s = s0;
    for k in 0..1_000_000u32 {
        let pol = if k % 2 == 0 { Polarity::Potentiate } else { Polarity::Depress };
        s = weight_write(&s, &p, pol);
    }
    ensure(s == s0, format!("after 10^6 writes w = {}", s.w))?;
    Ok("1 µA ⇄ 3 µA exact; clamps are no-ops; 10^6 alternating writes return to start".into())
}

fn criterion_7() -> Check {
    let p = SynapseParams {
        n_levels: 8,
        stdp_step: 3,
        ..Default::default()
    };
    let mid = SynapseState::new(4);
    let dt = 5e-9;
    let pot = stdp_update(&mid, &p, dt, SpikeOrder::PreThenPost);
    let dep = stdp_update(&mid, &p, dt, SpikeOrder::PostThenPre);
    ensure(pot.w > mid.w, format!("pre-then-post gave w {}", pot.w))?;
    ensure(dep.w < mid.w, format!("post-then-pre gave w {}", dep.w))?;
    let mut prev = u32::MAX;
    for k in 0..=1000 {
        let t = k as f64 * p.stdp_window / 500.0;
        let m = stdp_magnitude(&p, t);
        ensure(m <= prev, format!("magnitude rises at Δt = {t:e}"))?;
        if t >= p.stdp_window {
            ensure(m == 0, format!("non-zero magnitude at Δt = {t:e}"))?;
        }
        prev = m;
    }
    for order_dt in [0.0, dt, 20e-9] {
        let rev = pair_update(&mid, &p, PairRole::Hebbian, order_dt, SpikeOrder::PostThenPre);
        ensure(rev == mid, "Hebbian pair reacted to the reverse order")?;
        let rev = pair_update(&mid, &p, PairRole::AntiHebbian, order_dt, SpikeOrder::PreThenPost);
        ensure(rev == mid, "anti-Hebbian pair reacted to the reverse order")?;
    }
    Ok(format!("Δw = +{} / -{} at Δt = 5 ns; monotone kernel, zero beyond window", pot.w - mid.w, mid.w - dep.w))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let model = AmplifierEfficiencyModel::default();
    let led = LedParams::default();
    ensure(led.capacitance == 10e-15 && led.quantum_efficiency == 1e-3, "unexpected LED defaults")?;
    let e4 = amplifier_efficiency(&model, &led, 10_000);
    ensure((0.5e-4..=2e-4).contains(&e4), format!("η_amp(10^4) = {e4:e}"))?;
    let mut prev = 0.0;
    let mut n = 500u64;
    while n <= 10_000_000_000 {
        let e = amplifier_efficiency(&model, &led, n);
        ensure(e >= 0.5e-4, format!("η_amp({n}) = {e:e}"))?;
        ensure(e >= prev, format!("η_amp not monotone at {n}"))?;
        prev = e;
        n = (n as f64 * 1.07).ceil() as u64;
    }
    let mut worst = 1.0f64;
    for c in [10e-15, 50e-15, 100e-15] {
        for q in [1.0, 1e-1, 1e-2, 1e-3] {
            let led = LedParams {
                capacitance: c,
                quantum_efficiency: q,
                ..LedParams::default()
            };
            let big = amplifier_efficiency(&model, &led, 1_000_000_000_000);
            let ratio = big / (q / 10.0);
            worst = if (ratio.ln()).abs() > worst.ln().abs() { ratio } else { worst };
            ensure(
                (0.5..=2.0).contains(&ratio),
                format!("C = {c:e}, η_qe = {q:e}: asymptote {big:e} vs η_qe/10"),
            )?;
        }
    }
    within_runtime(start, Duration::from_secs(5))?;
    Ok(format!("η_amp(10^4) = {e4:.4e}; asymptote/(η_qe/10) worst {worst:.3} over 12 cells"))
}

fn criterion_9() -> Check {
    let p = NeuronParams {
        fanout: 1000,
        ..Default::default()
    };
    let (_, ev) = fire(&NeuronState::default(), &p, 0.0, Emission::Expected).map_err(|e| e.to_string())?;
    ensure(ev.n_photons == 10_000, format!("{} photons", ev.n_photons))?;
    let h_nu = PLANCK * p.transmitter.led.photon_frequency;
    let forced = ev.n_photons as f64 * h_nu / 1e-4;
    ensure((forced / 16.6e-12 - 1.0).abs() < 0.01, format!("N·hν/1e-4 = {forced:e} J"))?;
    ensure(
        (ev.e_amp / 16.6e-12 - 1.0).abs() < 0.01,
        format!("E_amp = {:e} J at η_amp = {:e}", ev.e_amp, ev.eta_amp),
    )?;
    let closure = ev.n_photons as f64 * h_nu / ev.eta_amp;
    ensure((closure / ev.e_amp - 1.0).abs() < 1e-12, "E_amp ≠ N·hν/η_amp")?;
    Ok(format!("10,000 photons; E_amp = {:.3} pJ at η_amp = {:.4e}", ev.e_amp * 1e12, ev.eta_amp))
}

const POWER_WINDOW: f64 = 10e-6;

fn criterion_10() -> Check {
    let start = Instant::now();
    let die = DiePreset::default();
    let cfg = die.build().map_err(|e| e.to_string())?;
    let rec = run(&cfg, POWER_WINDOW, Mode::Behavioral).map_err(|e| e.to_string())?;
    let p = power_report(&rec, &cfg, POWER_WINDOW).map_err(|e| e.to_string())?;
    let wafer = WaferPreset::default();
    let (_, wcfg) = wafer.sample_config().map_err(|e| e.to_string())?;
    let wrec = run(&wcfg, POWER_WINDOW, Mode::Behavioral).map_err(|e| e.to_string())?;
    let w = wafer.extrapolate(&power_report(&wrec, &wcfg, POWER_WINDOW).map_err(|e| e.to_string())?);
    let summary = format!(
        "die {:.3} mW (tx {:.3} mW, rx {:.3} µW); wafer {:.3} W, {:.2} W/m²; {:.1?}",
        p.total * 1e3,
        p.transmitter_power * 1e3,
        p.receiver_power * 1e6,
        w.total,
        w.power_density,
        start.elapsed()
    );
    ensure((0.33e-3..=3e-3).contains(&p.total), format!("die power outside [0.33, 3] mW: {summary}"))?;
    ensure((1.0 / 3.0..=3.0).contains(&w.total), format!("wafer power outside [1/3, 3] W: {summary}"))?;
    ensure(
        (10.0 / 3.0..=30.0).contains(&w.power_density),
        format!("wafer density outside [3.3, 30] W/m²: {summary}"),
    )?;
    within_runtime(start, Duration::from_secs(300))?;
    Ok(summary)
}

fn criterion_11() -> Check {
    let cfg = two_neuron(1e-3, 1.0, (0..5).map(|k| 1e-9 + k as f64 * 1e-6).collect());
    let t_end = 5.5e-6;
    let b = run(&cfg, t_end, Mode::Behavioral).map_err(|e| e.to_string())?;
    let d = run(&cfg, t_end, Mode::Device).map_err(|e| e.to_string())?;
    ensure(b.firings.len() == d.firings.len(), "firing counts differ")?;
    ensure(b.synaptic_events.len() == d.synaptic_events.len(), "synaptic event counts differ")?;
    ensure(b.synaptic_events.len() == 5, format!("{} synaptic events", b.synaptic_events.len()))?;
    let mut worst = 0.0f64;
    for (x, y) in b.firings.iter().zip(&d.firings) {
        worst = worst.max((x.t - y.t).abs());
    }
    for (x, y) in b.synaptic_events.iter().zip(&d.synaptic_events) {
        worst = worst.max((x.t - y.t).abs());
    }
    ensure(worst <= 1e-9, format!("event times differ by {worst:e} s"))?;
    let (ib, id) = (b.final_si[1][0], d.final_si[1][0]);
    let rel = (ib - id).abs() / ib.abs().max(id.abs());
    ensure(rel <= 0.05, format!("final I_si {ib:e} vs {id:e} A"))?;
    Ok(format!(
        "max time difference {:.1} ps; final I_si {:.3} nA vs {:.3} nA ({:.2}%)",
        worst * 1e12,
        ib * 1e9,
        id * 1e9,
        rel * 100.0
    ))
}

fn csv_bytes(r: &SpikeRecord) -> Vec<u8> {
    let mut out = Vec::new();
    r.write_firings_csv(&mut out).unwrap();
    r.write_synaptic_csv(&mut out).unwrap();
    r.write_plasticity_csv(&mut out).unwrap();
    r.write_ni_csv(&mut out).unwrap();
    r.write_final_state_csv(&mut out).unwrap();
    out
}

fn criterion_12() -> Check {
    let n = std::thread::available_parallelism().map(|x| x.get()).unwrap_or(1).max(4);
    let mut stdp = two_neuron(1e-3, 0.7, (0..20).map(|k| 1e-9 + k as f64 * 60e-9).collect());
    stdp.plasticity = true;
    stdp.trace_ni = true;
    stdp.emission = EmissionKind::Stochastic;
    let mut die = DiePreset::default().build().map_err(|e| e.to_string())?;
    die.log_synaptic_events = true;
    let mut looped = DiePreset {
        neurons: 400,
        side: 2e-3,
        seed: 3,
        ..Default::default()
    }
    .build()
    .map_err(|e| e.to_string())?;
    looped.closed_loop = true;
    looped.emission = EmissionKind::Stochastic;
    let (_, wafer) = WaferPreset::default().sample_config().map_err(|e| e.to_string())?;
    let cases: Vec<(&str, NetworkConfig, f64)> = vec![
        ("two-neuron stdp", stdp, 2e-6),
        ("die", die, 1e-6),
        ("closed-loop", looped, 2e-6),
        ("wafer sample", wafer, 1e-6),
    ];
    let mut total = 0usize;
    for (name, cfg, t_end) in cases {
        let a = csv_bytes(&run_with_threads(&cfg, t_end, Mode::Behavioral, 1).map_err(|e| e.to_string())?);
        let b = csv_bytes(&run_with_threads(&cfg, t_end, Mode::Behavioral, 1).map_err(|e| e.to_string())?);
        let c = csv_bytes(&run_with_threads(&cfg, t_end, Mode::Behavioral, n).map_err(|e| e.to_string())?);
        ensure(a == b, format!("{name}: serial reruns differ"))?;
        ensure(a == c, format!("{name}: serial and {n}-thread runs differ"))?;
        total += a.len();
    }
    Ok(format!("4 presets byte-identical at 1 and {n} threads ({total} CSV bytes)"))
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "RSJ oracle", criterion_1),
        (2, "fluxon-count calibration", criterion_2),
        (3, "synaptic event energy", criterion_3),
        (4, "SI decay law", criterion_4),
        (5, "loop capacity", criterion_5),
        (6, "binary synapse", criterion_6),
        (7, "STDP semantics", criterion_7),
        (8, "efficiency curves", criterion_8),
        (9, "firing-event arithmetic", criterion_9),
        (10, "power budget", criterion_10),
        (11, "cross-tier equivalence", criterion_11),
        (12, "determinism", criterion_12),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        match check() {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(why) => {
                println!("criterion {id:>2} FAIL  {name}: {why}");
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
