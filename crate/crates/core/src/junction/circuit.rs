use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use super::params::JunctionParams;
use crate::error::{Result, SimError};

/// Node index; `0` is ground.
pub type NodeId = usize;

/// Time-dependent current drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Drive {
    Constant { value: f64 },
    /// Linear ramp from zero to `value` over `[0, rise]`, then constant.
    Ramp { value: f64, rise: f64 },
    /// Piecewise-linear waveform through `(t, value)` points, held at the ends.
    Pwl { points: Vec<(f64, f64)> },
    /// Rectangular pulses of `amplitude` on top of `base` starting at each listed time.
    Pulses {
        base: f64,
        amplitude: f64,
        width: f64,
        starts: Vec<f64>,
    },
}

impl Drive {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Drive::Constant { value } => *value,
            Drive::Ramp { value, rise } => {
                if *rise <= 0.0 || t >= *rise {
                    *value
                } else if t <= 0.0 {
                    0.0
                } else {
                    value * t / rise
                }
            }
            Drive::Pwl { points } => pwl(points, t),
            Drive::Pulses {
                base,
                amplitude,
                width,
                starts,
            } => {
                if starts.iter().any(|&s| t >= s && t < s + width) {
                    base + amplitude
                } else {
                    *base
                }
            }
        }
    }

    /// True when the drive is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Drive::Constant { value } | Drive::Ramp { value, .. } => *value == 0.0,
            Drive::Pwl { points } => points.iter().all(|p| p.1 == 0.0),
            Drive::Pulses {
                base, amplitude, ..
            } => *base == 0.0 && *amplitude == 0.0,
        }
    }
}

fn pwl(points: &[(f64, f64)], t: f64) -> f64 {
    match points {
        [] => 0.0,
        [only] => only.1,
        _ => {
            if t <= points[0].0 {
                return points[0].1;
            }
            for w in points.windows(2) {
                let (t0, v0) = w[0];
                let (t1, v1) = w[1];
                if t <= t1 {
                    if t1 == t0 {
                        return v1;
                    }
                    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                }
            }
            points[points.len() - 1].1
        }
    }
}

/// A window during which an inductor branch acquires extra series
/// resistance (single-photon detector hotspot).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistancePulse {
    pub start: f64,
    pub duration: f64,
    pub resistance: f64,
}

/// One two-terminal circuit element. Currents are positive from `a` to `b`
/// through the element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    Junction {
        name: String,
        a: NodeId,
        b: NodeId,
        params: JunctionParams,
    },
    Inductor {
        name: String,
        a: NodeId,
        b: NodeId,
        inductance: f64,
        /// Constant series resistance (zero for a superconducting branch).
        #[serde(default)]
        resistance: f64,
        #[serde(default)]
        pulses: Vec<ResistancePulse>,
        /// Branch current at t = 0, A.
        #[serde(default)]
        initial_current: f64,
    },
    Resistor {
        name: String,
        a: NodeId,
        b: NodeId,
        resistance: f64,
    },
    /// Injects `drive(t)` into node `to`, drawing it from node `from`.
    CurrentSource {
        name: String,
        from: NodeId,
        to: NodeId,
        drive: Drive,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Junction { name, .. }
            | Element::Inductor { name, .. }
            | Element::Resistor { name, .. }
            | Element::CurrentSource { name, .. } => name,
        }
    }

    pub fn nodes(&self) -> (NodeId, NodeId) {
        match self {
            Element::Junction { a, b, .. }
            | Element::Inductor { a, b, .. }
            | Element::Resistor { a, b, .. } => (*a, *b),
            Element::CurrentSource { from, to, .. } => (*from, *to),
        }
    }
}

/// Signed mutual inductance between two named inductors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutualCoupling {
    pub a: String,
    pub b: String,
    /// Mutual inductance, H. The sign sets the coupling polarity.
    pub mutual: f64,
}

/// A small superconducting circuit: junctions, inductors, resistors and
/// current sources connected between numbered nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopCircuit {
    #[serde(default)]
    pub name: String,
    pub elements: Vec<Element>,
    #[serde(default)]
    pub couplings: Vec<MutualCoupling>,
}

impl LoopCircuit {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn junction(mut self, name: &str, a: NodeId, b: NodeId, params: JunctionParams) -> Self {
        self.elements.push(Element::Junction {
            name: name.into(),
            a,
            b,
            params,
        });
        self
    }

    pub fn inductor(mut self, name: &str, a: NodeId, b: NodeId, inductance: f64) -> Self {
        self.elements.push(Element::Inductor {
            name: name.into(),
            a,
            b,
            inductance,
            resistance: 0.0,
            pulses: Vec::new(),
            initial_current: 0.0,
        });
        self
    }

    pub fn lossy_inductor(
        mut self,
        name: &str,
        a: NodeId,
        b: NodeId,
        inductance: f64,
        resistance: f64,
        pulses: Vec<ResistancePulse>,
    ) -> Self {
        self.elements.push(Element::Inductor {
            name: name.into(),
            a,
            b,
            inductance,
            resistance,
            pulses,
            initial_current: 0.0,
        });
        self
    }

    /// Sets the t = 0 current of inductor `name` (no-op for other names).
    pub fn with_initial_current(mut self, name: &str, current: f64) -> Self {
        for e in &mut self.elements {
            if let Element::Inductor {
                name: n,
                initial_current,
                ..
            } = e
            {
                if n == name {
                    *initial_current = current;
                }
            }
        }
        self
    }

    pub fn resistor(mut self, name: &str, a: NodeId, b: NodeId, resistance: f64) -> Self {
        self.elements.push(Element::Resistor {
            name: name.into(),
            a,
            b,
            resistance,
        });
        self
    }

    pub fn source(mut self, name: &str, from: NodeId, to: NodeId, drive: Drive) -> Self {
        self.elements.push(Element::CurrentSource {
            name: name.into(),
            from,
            to,
            drive,
        });
        self
    }

    pub fn coupling(mut self, a: &str, b: &str, mutual: f64) -> Self {
        self.couplings.push(MutualCoupling {
            a: a.into(),
            b: b.into(),
            mutual,
        });
        self
    }

    /// Highest node index in use.
    pub fn node_count(&self) -> usize {
        self.elements
            .iter()
            .map(|e| {
                let (a, b) = e.nodes();
                a.max(b)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name() == name)
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.name() == name)
    }

    /// Replaces the drive of the named current source.
    pub fn set_drive(&mut self, name: &str, new_drive: Drive) -> Result<()> {
        match self.element_mut(name) {
            Some(Element::CurrentSource { drive, .. }) => {
                *drive = new_drive;
                Ok(())
            }
            _ => Err(SimError::UnknownId(name.into())),
        }
    }

    /// Checks element values, naming, connectivity and coupling bounds.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut inductances = HashMap::new();
        for e in &self.elements {
            if !names.insert(e.name().to_string()) {
                return Err(SimError::InvalidCircuit(format!("duplicate element name `{}`", e.name())));
            }
            let (a, b) = e.nodes();
            if a == b {
                return Err(SimError::InvalidCircuit(format!("element `{}` is shorted", e.name())));
            }
            match e {
                Element::Junction { name, params, .. } => params.validate(name)?,
                Element::Inductor {
                    name,
                    inductance,
                    resistance,
                    pulses,
                    initial_current,
                    ..
                } => {
                    if !initial_current.is_finite() {
                        return Err(SimError::param(format!("{name}.initial_current"), "must be finite"));
                    }
                    if !(*inductance > 0.0) || !inductance.is_finite() {
                        return Err(SimError::param(format!("{name}.inductance"), "must be finite and > 0"));
                    }
                    if !(*resistance >= 0.0) {
                        return Err(SimError::param(format!("{name}.resistance"), "must be >= 0"));
                    }
                    if pulses.iter().any(|p| !(p.resistance >= 0.0) || !(p.duration >= 0.0)) {
                        return Err(SimError::param(format!("{name}.pulses"), "negative resistance or duration"));
                    }
                    inductances.insert(name.clone(), *inductance);
                }
                Element::Resistor { name, resistance, .. } => {
                    if !(*resistance > 0.0) {
                        return Err(SimError::param(format!("{name}.resistance"), "must be > 0"));
                    }
                }
                Element::CurrentSource { .. } => {}
            }
        }
        for c in &self.couplings {
            let la = *inductances
                .get(&c.a)
                .ok_or_else(|| SimError::InvalidCircuit(format!("coupling names unknown inductor `{}`", c.a)))?;
            let lb = *inductances
                .get(&c.b)
                .ok_or_else(|| SimError::InvalidCircuit(format!("coupling names unknown inductor `{}`", c.b)))?;
            if c.a == c.b {
                return Err(SimError::InvalidCircuit(format!("self-coupling on `{}`", c.a)));
            }
            if c.mutual.abs() > (la * lb).sqrt() {
                return Err(SimError::param(
                    format!("coupling.{}-{}", c.a, c.b),
                    format!("|M| = {:e} exceeds sqrt(L1*L2) = {:e}", c.mutual.abs(), (la * lb).sqrt()),
                ));
            }
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.node_count();
        if n == 0 {
            return Err(SimError::InvalidCircuit("circuit has no nodes besides ground".into()));
        }
        let mut adj = vec![Vec::new(); n + 1];
        for e in &self.elements {
            let (a, b) = e.nodes();
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n + 1];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(orphan) => Err(SimError::InvalidCircuit(format!(
                "node {orphan} is not connected to ground"
            ))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jj() -> JunctionParams {
        JunctionParams::with_beta_c(10e-6, 2.0, 0.3)
    }

    #[test]
    fn drives_evaluate() {
        assert_eq!(Drive::Constant { value: 2.0 }.at(5.0), 2.0);
        let r = Drive::Ramp { value: 4.0, rise: 2.0 };
        assert_eq!(r.at(-1.0), 0.0);
        assert_eq!(r.at(1.0), 2.0);
        assert_eq!(r.at(3.0), 4.0);
        let p = Drive::Pwl {
            points: vec![(0.0, 0.0), (1.0, 10.0), (2.0, 10.0)],
        };
        assert_eq!(p.at(0.5), 5.0);
        assert_eq!(p.at(9.0), 10.0);
        let pulses = Drive::Pulses {
            base: 1.0,
            amplitude: 2.0,
            width: 1.0,
            starts: vec![1.0, 5.0],
        };
        assert_eq!(pulses.at(0.5), 1.0);
        assert_eq!(pulses.at(1.5), 3.0);
        assert_eq!(pulses.at(5.99), 3.0);
        assert_eq!(pulses.at(6.0), 1.0);
    }

    #[test]
    fn rejects_excess_mutual_inductance() {
        let c = LoopCircuit::new("t")
            .inductor("L1", 1, 0, 1e-9)
            .inductor("L2", 2, 0, 4e-9)
            .resistor("R1", 1, 0, 1.0)
            .resistor("R2", 2, 0, 1.0)
            .coupling("L1", "L2", 2.5e-9);
        let err = c.validate().unwrap_err();
        assert!(matches!(err, SimError::InvalidParameter { .. }), "{err}");
        let ok = LoopCircuit { couplings: vec![], ..c }.coupling("L1", "L2", -2e-9);
        ok.validate().unwrap();
    }

    #[test]
    fn rejects_disconnected_and_duplicate() {
        let c = LoopCircuit::new("t").junction("J1", 1, 0, jj()).resistor("R", 2, 3, 1.0);
        assert!(matches!(c.validate(), Err(SimError::InvalidCircuit(_))));
        let d = LoopCircuit::new("t").junction("J1", 1, 0, jj()).junction("J1", 1, 0, jj());
        assert!(d.validate().is_err());
    }

    #[test]
    fn set_drive_requires_source() {
        let mut c = LoopCircuit::new("t")
            .junction("J1", 1, 0, jj())
            .source("Ib", 0, 1, Drive::Constant { value: 1e-6 });
        c.set_drive("Ib", Drive::Constant { value: 2e-6 }).unwrap();
        assert!(c.set_drive("J1", Drive::Constant { value: 0.0 }).is_err());
    }
}
