//! Transient integration of [`LoopCircuit`]s.
//!
//! The state vector holds the voltages of capacitive nodes, the phase of
//! every junction and the current of every inductor. Nodes without
//! capacitance are algebraic: their voltages follow from Kirchhoff's current
//! law at every evaluation, which keeps the system an ordinary ODE that both
//! the implicit and the explicit integrator can advance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::circuit::{Drive, Element, LoopCircuit, ResistancePulse};
use super::trace::{PhaseSlip, SolverStats, Trace};
use crate::constants::FLUX_QUANTUM;
use crate::error::{Result, SimError};

const TWO_PI_OVER_PHI0: f64 = 2.0 * PI / FLUX_QUANTUM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Adaptive, L-stable two-stage SDIRK with an embedded error estimate.
    Sdirk2,
    /// Fixed-step classical Runge–Kutta at `dt_max`, for cross-checks.
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    /// Largest step, s. Also the default trace sampling interval.
    pub dt_max: f64,
    pub rel_tol: f64,
    /// Absolute tolerance on currents, A.
    pub abs_tol: f64,
    /// Absolute tolerance on junction phases, rad.
    pub phase_tol: f64,
    pub t_end: f64,
    /// Step-size floor below which integration is declared failed, s.
    pub dt_min: f64,
    /// Trace sampling interval, s (defaults to `dt_max`).
    pub sample_interval: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Sdirk2,
            dt_max: 1e-12,
            rel_tol: 1e-4,
            abs_tol: 1e-10,
            phase_tol: 1e-3,
            t_end: 10e-9,
            dt_min: 1e-20,
            sample_interval: None,
            max_steps: 200_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solver.dt_max", self.dt_max),
            ("solver.rel_tol", self.rel_tol),
            ("solver.abs_tol", self.abs_tol),
            ("solver.phase_tol", self.phase_tol),
            ("solver.dt_min", self.dt_min),
        ];
        for (path, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::param(path, "must be finite and > 0"));
            }
        }
        if !(self.t_end >= 0.0) {
            return Err(SimError::param("solver.t_end", "must be >= 0"));
        }
        if let Some(s) = self.sample_interval {
            if !(s > 0.0) {
                return Err(SimError::param("solver.sample_interval", "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Ground,
    Cap(usize),
    Alg(usize),
}

#[derive(Debug, Clone)]
struct JunctionBranch {
    a: usize,
    b: usize,
    ic: f64,
    conductance: f64,
    capacitance: f64,
}

#[derive(Debug, Clone)]
struct InductorBranch {
    a: usize,
    b: usize,
    resistance: f64,
    pulses: Vec<ResistancePulse>,
    initial_current: f64,
}

impl InductorBranch {
    fn resistance_at(&self, t: f64) -> f64 {
        self.resistance
            + self
                .pulses
                .iter()
                .filter(|p| t >= p.start && t < p.start + p.duration)
                .map(|p| p.resistance)
                .sum::<f64>()
    }
}

/// Assembled, immutable form of a circuit.
#[derive(Debug, Clone)]
pub(crate) struct System {
    n_nodes: usize,
    slots: Vec<Slot>,
    cap_nodes: Vec<usize>,
    alg_nodes: Vec<usize>,
    g: DMatrix<f64>,
    c_cc_inv: DMatrix<f64>,
    g_aa_inv: DMatrix<f64>,
    l_inv: DMatrix<f64>,
    junctions: Vec<JunctionBranch>,
    inductors: Vec<InductorBranch>,
    sources: Vec<(usize, usize, Drive)>,
    pub(crate) junction_names: Vec<String>,
    pub(crate) inductor_names: Vec<String>,
    breakpoints: Vec<f64>,
}

/// Voltages and injections evaluated at one state.
struct Evaluation {
    v: DVector<f64>,
    dv: DVector<f64>,
    deriv: DVector<f64>,
    residual: f64,
}

impl System {
    pub(crate) fn assemble(circuit: &LoopCircuit) -> Result<Self> {
        circuit.validate()?;
        let n = circuit.node_count();
        let mut g = DMatrix::zeros(n, n);
        let mut c = DMatrix::zeros(n, n);
        let mut junctions = Vec::new();
        let mut junction_names = Vec::new();
        let mut inductors = Vec::new();
        let mut inductor_names = Vec::new();
        let mut inductances = Vec::new();
        let mut sources = Vec::new();
        let mut breakpoints = Vec::new();

        let stamp = |m: &mut DMatrix<f64>, a: usize, b: usize, val: f64| {
            if a > 0 {
                m[(a - 1, a - 1)] += val;
            }
            if b > 0 {
                m[(b - 1, b - 1)] += val;
            }
            if a > 0 && b > 0 {
                m[(a - 1, b - 1)] -= val;
                m[(b - 1, a - 1)] -= val;
            }
        };

        for e in &circuit.elements {
            match e {
                Element::Junction { name, a, b, params } => {
                    let conductance = 1.0 / params.shunt_resistance;
                    stamp(&mut g, *a, *b, conductance);
                    stamp(&mut c, *a, *b, params.capacitance);
                    junctions.push(JunctionBranch {
                        a: *a,
                        b: *b,
                        ic: params.critical_current,
                        conductance,
                        capacitance: params.capacitance,
                    });
                    junction_names.push(name.clone());
                }
                Element::Inductor {
                    name,
                    a,
                    b,
                    inductance,
                    resistance,
                    pulses,
                    initial_current,
                } => {
                    for p in pulses {
                        breakpoints.push(p.start);
                        breakpoints.push(p.start + p.duration);
                    }
                    inductors.push(InductorBranch {
                        a: *a,
                        b: *b,
                        resistance: *resistance,
                        pulses: pulses.clone(),
                        initial_current: *initial_current,
                    });
                    inductor_names.push(name.clone());
                    inductances.push(*inductance);
                }
                Element::Resistor { a, b, resistance, .. } => {
                    stamp(&mut g, *a, *b, 1.0 / resistance);
                }
                Element::CurrentSource { from, to, drive, .. } => {
                    match drive {
                        Drive::Ramp { rise, .. } => breakpoints.push(*rise),
                        Drive::Pwl { points } => breakpoints.extend(points.iter().map(|p| p.0)),
                        Drive::Pulses { width, starts, .. } => {
                            for s in starts {
                                breakpoints.push(*s);
                                breakpoints.push(s + width);
                            }
                        }
                        Drive::Constant { .. } => {}
                    }
                    sources.push((*from, *to, drive.clone()));
                }
            }
        }

        let mut slots = vec![Slot::Ground; n + 1];
        let mut cap_nodes = Vec::new();
        let mut alg_nodes = Vec::new();
        for node in 1..=n {
            if c[(node - 1, node - 1)] > 0.0 {
                slots[node] = Slot::Cap(cap_nodes.len());
                cap_nodes.push(node);
            } else {
                slots[node] = Slot::Alg(alg_nodes.len());
                alg_nodes.push(node);
            }
        }

        let sub = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i] - 1, cols[j] - 1)])
        };
        let c_cc = sub(&c, &cap_nodes, &cap_nodes);
        let c_cc_inv = c_cc.try_inverse().ok_or_else(|| {
            SimError::InvalidCircuit("capacitance matrix is singular (floating capacitive island)".into())
        })?;
        let g_aa = sub(&g, &alg_nodes, &alg_nodes);
        let g_aa_inv = if alg_nodes.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            let nodes = alg_nodes.clone();
            g_aa.try_inverse().ok_or_else(|| {
                SimError::InvalidCircuit(format!(
                    "nodes {nodes:?} have neither capacitance nor a resistive path; voltage undetermined"
                ))
            })?
        };

        let nl = inductors.len();
        let mut l = DMatrix::from_diagonal(&DVector::from_vec(inductances));
        for cp in &circuit.couplings {
            let i = inductor_names.iter().position(|x| *x == cp.a).expect("validated");
            let j = inductor_names.iter().position(|x| *x == cp.b).expect("validated");
            l[(i, j)] += cp.mutual;
            l[(j, i)] += cp.mutual;
        }
        let l_inv = if nl == 0 {
            DMatrix::zeros(0, 0)
        } else {
            l.try_inverse()
                .ok_or_else(|| SimError::InvalidCircuit("inductance matrix is singular".into()))?
        };

        breakpoints.retain(|t| t.is_finite() && *t > 0.0);
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();

        Ok(Self {
            n_nodes: n,
            slots,
            cap_nodes,
            alg_nodes,
            g,
            c_cc_inv,
            g_aa_inv,
            l_inv,
            junctions,
            inductors,
            sources,
            junction_names,
            inductor_names,
            breakpoints,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.cap_nodes.len() + self.junctions.len() + self.inductors.len()
    }

    fn phase_offset(&self) -> usize {
        self.cap_nodes.len()
    }

    fn current_offset(&self) -> usize {
        self.cap_nodes.len() + self.junctions.len()
    }

    /// Absolute tolerance for each state component.
    fn abs_tolerances(&self, cfg: &SolverConfig) -> DVector<f64> {
        let mut tol = DVector::zeros(self.dim());
        // voltages scaled by a 1 Ω reference
        for i in 0..self.cap_nodes.len() {
            tol[i] = cfg.abs_tol;
        }
        for k in 0..self.junctions.len() {
            tol[self.phase_offset() + k] = cfg.phase_tol;
        }
        for l in 0..self.inductors.len() {
            tol[self.current_offset() + l] = cfg.abs_tol;
        }
        tol
    }

    fn typical_scale(&self, i: usize) -> f64 {
        if i < self.phase_offset() {
            1e-5
        } else if i < self.current_offset() {
            1.0
        } else {
            1e-6
        }
    }

    fn evaluate(&self, t: f64, y: &DVector<f64>) -> Evaluation {
        let n = self.n_nodes;
        let mut inj = DVector::zeros(n);
        let add = |inj: &mut DVector<f64>, node: usize, val: f64| {
            if node > 0 {
                inj[node - 1] += val;
            }
        };
        for (from, to, drive) in &self.sources {
            let i = drive.at(t);
            add(&mut inj, *to, i);
            add(&mut inj, *from, -i);
        }
        let po = self.phase_offset();
        for (k, j) in self.junctions.iter().enumerate() {
            let s = j.ic * y[po + k].sin();
            add(&mut inj, j.a, -s);
            add(&mut inj, j.b, s);
        }
        let co = self.current_offset();
        for (l, ind) in self.inductors.iter().enumerate() {
            let i = y[co + l];
            add(&mut inj, ind.a, -i);
            add(&mut inj, ind.b, i);
        }

        let mut v = DVector::zeros(n);
        for (i, &node) in self.cap_nodes.iter().enumerate() {
            v[node - 1] = y[i];
        }
        if !self.alg_nodes.is_empty() {
            let rhs = DVector::from_fn(self.alg_nodes.len(), |i, _| {
                let node = self.alg_nodes[i];
                let mut r = inj[node - 1];
                for &cn in &self.cap_nodes {
                    r -= self.g[(node - 1, cn - 1)] * v[cn - 1];
                }
                r
            });
            let va = &self.g_aa_inv * rhs;
            for (i, &node) in self.alg_nodes.iter().enumerate() {
                v[node - 1] = va[i];
            }
        }

        // Net current into each node that is not carried by conductances.
        let net = &inj - &self.g * &v;
        let mut dv = DVector::zeros(n);
        let mut deriv = DVector::zeros(self.dim());
        if !self.cap_nodes.is_empty() {
            let q = DVector::from_fn(self.cap_nodes.len(), |i, _| net[self.cap_nodes[i] - 1]);
            let dvc = &self.c_cc_inv * q;
            for (i, &node) in self.cap_nodes.iter().enumerate() {
                dv[node - 1] = dvc[i];
                deriv[i] = dvc[i];
            }
        }
        let volt = |v: &DVector<f64>, node: usize| if node == 0 { 0.0 } else { v[node - 1] };
        for (k, j) in self.junctions.iter().enumerate() {
            deriv[po + k] = TWO_PI_OVER_PHI0 * (volt(&v, j.a) - volt(&v, j.b));
        }
        if !self.inductors.is_empty() {
            let drop = DVector::from_fn(self.inductors.len(), |l, _| {
                let ind = &self.inductors[l];
                volt(&v, ind.a) - volt(&v, ind.b) - ind.resistance_at(t) * y[co + l]
            });
            let di = &self.l_inv * drop;
            for l in 0..self.inductors.len() {
                deriv[co + l] = di[l];
            }
        }

        // KCL residual including capacitive currents.
        let mut residual: f64 = 0.0;
        for node in 1..=n {
            let mut r = net[node - 1];
            if let Slot::Cap(_) = self.slots[node] {
                for &cn in &self.cap_nodes {
                    r -= self.cap_entry(node, cn) * dv[cn - 1];
                }
            }
            residual = residual.max(r.abs());
        }
        Evaluation {
            v,
            dv,
            deriv,
            residual,
        }
    }

    fn cap_entry(&self, a: usize, b: usize) -> f64 {
        let mut c = 0.0;
        for j in &self.junctions {
            if j.capacitance == 0.0 {
                continue;
            }
            if a == b && (j.a == a || j.b == a) {
                c += j.capacitance;
            } else if (j.a == a && j.b == b) || (j.a == b && j.b == a) {
                c -= j.capacitance;
            }
        }
        c
    }

    fn rhs(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        self.evaluate(t, y).deriv
    }

    fn jacobian(&self, t: f64, y: &DVector<f64>, f0: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut yp = y.clone();
        for col in 0..n {
            let delta = 1e-7 * y[col].abs().max(self.typical_scale(col));
            yp[col] = y[col] + delta;
            let f1 = self.rhs(t, &yp);
            yp[col] = y[col];
            for row in 0..n {
                jac[(row, col)] = (f1[row] - f0[row]) / delta;
            }
        }
        jac
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.breakpoints.iter().copied().find(|&b| b > t * (1.0 + 1e-12) + 1e-24)
    }

    fn junction_current(&self, k: usize, y: &DVector<f64>, e: &Evaluation) -> f64 {
        let j = &self.junctions[k];
        let volt = |v: &DVector<f64>, node: usize| if node == 0 { 0.0 } else { v[node - 1] };
        j.ic * y[self.phase_offset() + k].sin()
            + j.conductance * (volt(&e.v, j.a) - volt(&e.v, j.b))
            + j.capacitance * (volt(&e.dv, j.a) - volt(&e.dv, j.b))
    }
}

const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

enum StepOutcome {
    Accepted { y: DVector<f64>, err: f64 },
    NewtonFailed,
}

fn weighted_norm(v: &DVector<f64>, y: &DVector<f64>, atol: &DVector<f64>, rtol: f64) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = v
        .iter()
        .zip(y.iter())
        .zip(atol.iter())
        .map(|((e, yi), a)| {
            let w = a + rtol * yi.abs();
            (e / w).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

struct Sdirk<'a> {
    sys: &'a System,
    atol: DVector<f64>,
    rtol: f64,
}

impl Sdirk<'_> {
    fn solve_stage(
        &self,
        t_stage: f64,
        base: &DVector<f64>,
        guess: DVector<f64>,
        hg: f64,
        w_inv: &DMatrix<f64>,
    ) -> Option<DVector<f64>> {
        let mut z = guess;
        let mut prev_norm = f64::INFINITY;
        for iter in 0..12 {
            let f = self.sys.rhs(t_stage, &z);
            let resid = &z - base - f * hg;
            let dz = w_inv * resid;
            z -= &dz;
            if !z.iter().all(|x| x.is_finite()) {
                return None;
            }
            let norm = weighted_norm(&dz, &z, &self.atol, self.rtol);
            if norm < 1e-3 {
                return Some(z);
            }
            if iter >= 2 && norm > 0.9 * prev_norm {
                return None;
            }
            prev_norm = norm;
        }
        None
    }

    fn step(&self, t: f64, y: &DVector<f64>, h: f64) -> StepOutcome {
        let n = y.len();
        let f0 = self.sys.rhs(t, y);
        let jac = self.sys.jacobian(t, y, &f0);
        let hg = h * GAMMA;
        let w = DMatrix::identity(n, n) - jac * hg;
        let Some(w_inv) = w.try_inverse() else {
            return StepOutcome::NewtonFailed;
        };
        let guess1 = y + &f0 * hg;
        let Some(z1) = self.solve_stage(t + GAMMA * h, y, guess1, hg, &w_inv) else {
            return StepOutcome::NewtonFailed;
        };
        let k1 = (&z1 - y) / hg;
        let base2 = y + &k1 * (h * (1.0 - GAMMA));
        let guess2 = y + &k1 * h;
        let Some(z2) = self.solve_stage(t + h, &base2, guess2, hg, &w_inv) else {
            return StepOutcome::NewtonFailed;
        };
        let k2 = (&z2 - &base2) / hg;
        let err_vec = (k2 - k1) * hg;
        let err = weighted_norm(&err_vec, &z2, &self.atol, self.rtol);
        StepOutcome::Accepted { y: z2, err }
    }
}

fn rk4(sys: &System, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = sys.rhs(t, y);
    let k2 = sys.rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = sys.rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = sys.rhs(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrates the circuit to `config.t_end`. All phases and node voltages
/// start at zero; inductor currents start at their `initial_current`.
pub fn integrate_transient(circuit: &LoopCircuit, config: &SolverConfig) -> Result<Trace> {
    config.validate()?;
    let sys = System::assemble(circuit)?;
    run(&sys, config)
}

fn run(sys: &System, cfg: &SolverConfig) -> Result<Trace> {
    let dim = sys.dim();
    let mut y = DVector::zeros(dim);
    let co = sys.current_offset();
    for (k, l) in sys.inductors.iter().enumerate() {
        y[co + k] = l.initial_current;
    }
    let mut t = 0.0;
    let mut trace = Trace::new(
        sys.junction_names.clone(),
        sys.inductor_names.clone(),
        sys.n_nodes,
    );
    let sample_interval = cfg.sample_interval.unwrap_or(cfg.dt_max);
    let po = sys.phase_offset();
    let nj = sys.junctions.len();
    let phase_ref: Vec<f64> = (0..nj).map(|k| y[po + k]).collect();
    let winding = |phi: f64, k: usize| ((phi - phase_ref[k] + PI) / (2.0 * PI)).floor() as i64;

    record(sys, &mut trace, t, &y);
    let mut last_rec = t;

    let atol = sys.abs_tolerances(cfg);
    let sdirk = Sdirk {
        sys,
        atol: atol.clone(),
        rtol: cfg.rel_tol,
    };
    let mut stats = SolverStats::default();
    let mut h = match cfg.method {
        Method::Sdirk2 => (cfg.dt_max * 0.01).max(cfg.dt_min * 10.0),
        Method::Rk4 => cfg.dt_max,
    };
    let end_eps = cfg.t_end * 1e-12;

    while t < cfg.t_end - end_eps {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(SimError::Integration {
                t,
                reason: format!("step budget of {} exhausted", cfg.max_steps),
            });
        }
        let mut h_try = h.min(cfg.dt_max).min(cfg.t_end - t);
        if let Some(bp) = sys.next_breakpoint(t) {
            if bp < t + h_try {
                h_try = bp - t;
            }
        }
        let (y_new, h_next) = match cfg.method {
            Method::Rk4 => (rk4(sys, t, &y, h_try), cfg.dt_max),
            Method::Sdirk2 => match sdirk.step(t, &y, h_try) {
                StepOutcome::Accepted { y: yn, err } if err <= 1.0 => {
                    let factor = if err == 0.0 {
                        4.0
                    } else {
                        (0.9 * err.powf(-0.5)).clamp(0.2, 4.0)
                    };
                    (yn, h_try * factor)
                }
                StepOutcome::Accepted { err, .. } => {
                    stats.rejected += 1;
                    h = h_try * (0.9 * err.powf(-0.5)).clamp(0.1, 0.5);
                    if h < cfg.dt_min {
                        return Err(SimError::Integration {
                            t,
                            reason: format!("step size {h:.3e} s below floor (error norm {err:.3e})"),
                        });
                    }
                    continue;
                }
                StepOutcome::NewtonFailed => {
                    stats.rejected += 1;
                    stats.newton_failures += 1;
                    h = h_try * 0.25;
                    if h < cfg.dt_min {
                        return Err(SimError::Integration {
                            t,
                            reason: format!("Newton iteration failed to converge down to step {h:.3e} s"),
                        });
                    }
                    continue;
                }
            },
        };
        if !y_new.iter().all(|v| v.is_finite()) {
            return Err(SimError::Integration {
                t,
                reason: "state became non-finite".into(),
            });
        }
        stats.accepted += 1;
        stats.min_step = stats.min_step.min(h_try);
        stats.max_step = stats.max_step.max(h_try);

        for k in 0..nj {
            let (p0, p1) = (y[po + k], y_new[po + k]);
            let (m0, m1) = (winding(p0, k), winding(p1, k));
            if m0 != m1 {
                let dir = if m1 > m0 { 1 } else { -1 };
                let mut m = m0;
                while m != m1 {
                    let boundary = if dir > 0 { m + 1 } else { m };
                    let phi_b = phase_ref[k] - PI + 2.0 * PI * boundary as f64;
                    let frac = ((phi_b - p0) / (p1 - p0)).clamp(0.0, 1.0);
                    trace.slips.push(PhaseSlip {
                        t: t + frac * h_try,
                        junction: k,
                        direction: dir,
                    });
                    m += dir as i64;
                }
            }
        }

        t += h_try;
        y = y_new;
        h = h_next;
        let done = t >= cfg.t_end - end_eps;
        if done || t + h.min(cfg.dt_max) - last_rec > sample_interval * (1.0 + 1e-9) {
            record(sys, &mut trace, t, &y);
            last_rec = t;
        }
    }
    trace.stats = stats;
    Ok(trace)
}

fn record(sys: &System, trace: &mut Trace, t: f64, y: &DVector<f64>) {
    let e = sys.evaluate(t, y);
    let po = sys.phase_offset();
    let co = sys.current_offset();
    let volt = |node: usize| if node == 0 { 0.0 } else { e.v[node - 1] };
    trace.time.push(t);
    for (k, j) in sys.junctions.iter().enumerate() {
        trace.phase[k].push(y[po + k]);
        trace.voltage[k].push(volt(j.a) - volt(j.b));
        trace.junction_current[k].push(sys.junction_current(k, y, &e));
    }
    for l in 0..sys.inductors.len() {
        trace.inductor_current[l].push(y[co + l]);
    }
    for node in 1..=sys.n_nodes {
        trace.node_voltage[node - 1].push(e.v[node - 1]);
    }
    trace.kcl_residual.push(e.residual);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::params::{rsj_mean_voltage, JunctionParams};

    fn overdamped() -> JunctionParams {
        JunctionParams {
            critical_current: 10e-6,
            shunt_resistance: 2.0,
            capacitance: 0.0,
            hysteretic: false,
        }
    }

    fn biased(bias: f64, params: JunctionParams) -> LoopCircuit {
        LoopCircuit::new("single")
            .junction("J1", 1, 0, params)
            .source("Ib", 0, 1, Drive::Constant { value: bias })
    }

    #[test]
    fn quiescent_circuit_stays_at_rest() {
        let c = LoopCircuit::new("rest")
            .junction("J1", 1, 0, JunctionParams::with_beta_c(10e-6, 2.0, 0.3))
            .inductor("L1", 1, 2, 100e-12)
            .junction("J2", 2, 0, JunctionParams::with_beta_c(10e-6, 2.0, 0.3))
            .source("Ib", 0, 1, Drive::Constant { value: 0.0 });
        let cfg = SolverConfig {
            t_end: 200e-12,
            ..Default::default()
        };
        let tr = integrate_transient(&c, &cfg).unwrap();
        for k in 0..2 {
            assert!(tr.phase[k].iter().all(|&p| p == 0.0));
            assert!(tr.voltage[k].iter().all(|&v| v == 0.0));
        }
        assert!(tr.slips.is_empty());
    }

    #[test]
    fn subcritical_bias_produces_no_slips() {
        let tr = integrate_transient(
            &biased(8e-6, overdamped()),
            &SolverConfig {
                t_end: 1e-9,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(tr.count_fluxons("J1").unwrap(), 0);
        let expected = (0.8f64).asin();
        assert!((tr.phase[0].last().unwrap() - expected).abs() < 1e-3);
    }

    #[test]
    fn overdamped_mean_voltage_matches_closed_form() {
        for &(bias, method) in &[(20e-6, Method::Sdirk2), (15e-6, Method::Rk4)] {
            let cfg = SolverConfig {
                method,
                t_end: 2e-9,
                dt_max: if method == Method::Rk4 { 0.05e-12 } else { 1e-12 },
                ..Default::default()
            };
            let tr = integrate_transient(&biased(bias, overdamped()), &cfg).unwrap();
            let sim = tr.mean_voltage("J1").unwrap();
            let exact = rsj_mean_voltage(&overdamped(), bias).unwrap();
            assert!((sim / exact - 1.0).abs() < 0.01, "{method:?}: {sim} vs {exact}");
        }
    }

    #[test]
    fn kcl_holds_with_capacitive_and_algebraic_nodes() {
        let c = LoopCircuit::new("mixed")
            .junction("J1", 1, 0, JunctionParams::with_beta_c(10e-6, 2.0, 0.3))
            .resistor("R", 1, 2, 2.0)
            .inductor("L", 2, 0, 50e-12)
            .source("Ib", 0, 1, Drive::Ramp { value: 25e-6, rise: 20e-12 });
        let cfg = SolverConfig {
            t_end: 300e-12,
            abs_tol: 1e-10,
            ..Default::default()
        };
        let tr = integrate_transient(&c, &cfg).unwrap();
        assert!(tr.max_kcl_residual() < cfg.abs_tol, "{}", tr.max_kcl_residual());
        let gaps = tr.time.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(gaps <= cfg.dt_max * (1.0 + 1e-6));
    }

    #[test]
    fn undetermined_node_is_rejected() {
        let c = LoopCircuit::new("bad")
            .inductor("L1", 1, 2, 1e-9)
            .inductor("L2", 2, 0, 1e-9)
            .junction("J", 1, 0, overdamped());
        assert!(matches!(integrate_transient(&c, &SolverConfig::default()), Err(SimError::InvalidCircuit(_))));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SolverConfig {
            dt_max: 0.0,
            ..Default::default()
        };
        assert!(integrate_transient(&biased(1e-6, overdamped()), &cfg).is_err());
    }
}
