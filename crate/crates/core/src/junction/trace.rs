use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{self, Write};

use crate::constants::FLUX_QUANTUM;
use crate::error::{Result, SimError};

/// A 2π phase slip localized in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSlip {
    pub t: f64,
    pub junction: usize,
    /// +1 for a forward slip, −1 for a reverse one.
    pub direction: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_failures: usize,
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for SolverStats {
    fn default() -> Self {
        Self {
            accepted: 0,
            rejected: 0,
            newton_failures: 0,
            min_step: f64::INFINITY,
            max_step: 0.0,
        }
    }
}

/// Sampled solution of a transient run. Series are stored per quantity,
/// indexed `[element][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub junction_names: Vec<String>,
    pub inductor_names: Vec<String>,
    pub time: Vec<f64>,
    pub phase: Vec<Vec<f64>>,
    /// Junction voltage, V.
    pub voltage: Vec<Vec<f64>>,
    /// Total junction current (supercurrent, shunt and displacement), A.
    pub junction_current: Vec<Vec<f64>>,
    pub inductor_current: Vec<Vec<f64>>,
    pub node_voltage: Vec<Vec<f64>>,
    /// Largest Kirchhoff current-law residual over all nodes, A.
    pub kcl_residual: Vec<f64>,
    pub slips: Vec<PhaseSlip>,
    pub stats: SolverStats,
}

impl Trace {
    pub(crate) fn new(junction_names: Vec<String>, inductor_names: Vec<String>, nodes: usize) -> Self {
        let nj = junction_names.len();
        let nl = inductor_names.len();
        Self {
            junction_names,
            inductor_names,
            time: Vec::new(),
            phase: vec![Vec::new(); nj],
            voltage: vec![Vec::new(); nj],
            junction_current: vec![Vec::new(); nj],
            inductor_current: vec![Vec::new(); nl],
            node_voltage: vec![Vec::new(); nodes],
            kcl_residual: Vec::new(),
            slips: Vec::new(),
            stats: SolverStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn junction(&self, name: &str) -> Result<usize> {
        self.junction_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| SimError::UnknownId(name.into()))
    }

    pub fn inductor(&self, name: &str) -> Result<usize> {
        self.inductor_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| SimError::UnknownId(name.into()))
    }

    /// Net winding number round(Δφ/2π) of a junction over the trace.
    pub fn count_fluxons(&self, junction: &str) -> Result<i64> {
        let k = self.junction(junction)?;
        let phase = &self.phase[k];
        match (phase.first(), phase.last()) {
            (Some(a), Some(b)) => Ok(((b - a) / (2.0 * PI)).round() as i64),
            _ => Ok(0),
        }
    }

    /// Net number of localized slip events of a junction.
    pub fn slip_count(&self, junction: &str) -> Result<i64> {
        let k = self.junction(junction)?;
        Ok(self
            .slips
            .iter()
            .filter(|s| s.junction == k)
            .map(|s| s.direction as i64)
            .sum())
    }

    /// Times of forward slips of a junction.
    pub fn slip_times(&self, junction: &str) -> Result<Vec<f64>> {
        let k = self.junction(junction)?;
        Ok(self
            .slips
            .iter()
            .filter(|s| s.junction == k && s.direction > 0)
            .map(|s| s.t)
            .collect())
    }

    /// Time-averaged junction voltage. With two or more slips the average is
    /// taken over whole periods between the first and last slip, which is
    /// exact for periodic motion; otherwise it is Φ0·Δφ/(2π·T).
    pub fn mean_voltage(&self, junction: &str) -> Result<f64> {
        let times = self.slip_times(junction)?;
        if times.len() >= 2 {
            let span = times[times.len() - 1] - times[0];
            if span > 0.0 {
                return Ok(FLUX_QUANTUM * (times.len() - 1) as f64 / span);
            }
        }
        let k = self.junction(junction)?;
        let (t0, t1) = (self.time[0], self.time[self.len() - 1]);
        if t1 <= t0 {
            return Ok(0.0);
        }
        let dphi = self.phase[k][self.len() - 1] - self.phase[k][0];
        Ok(FLUX_QUANTUM * dphi / (2.0 * PI * (t1 - t0)))
    }

    pub fn final_inductor_current(&self, name: &str) -> Result<f64> {
        let l = self.inductor(name)?;
        Ok(*self.inductor_current[l].last().unwrap_or(&0.0))
    }

    pub fn max_kcl_residual(&self) -> f64 {
        self.kcl_residual.iter().copied().fold(0.0, f64::max)
    }

    /// Keeps every `stride`-th sample plus the last one.
    pub fn resampled(&self, stride: usize) -> Trace {
        let stride = stride.max(1);
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if n > 0 && idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick_all = |vv: &Vec<Vec<f64>>| vv.iter().map(pick).collect::<Vec<_>>();
        Trace {
            junction_names: self.junction_names.clone(),
            inductor_names: self.inductor_names.clone(),
            time: pick(&self.time),
            phase: pick_all(&self.phase),
            voltage: pick_all(&self.voltage),
            junction_current: pick_all(&self.junction_current),
            inductor_current: pick_all(&self.inductor_current),
            node_voltage: pick_all(&self.node_voltage),
            kcl_residual: pick(&self.kcl_residual),
            slips: self.slips.clone(),
            stats: self.stats,
        }
    }

    /// Writes the trace as CSV: time in s, phases in rad, voltages in V,
    /// currents in A.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["time_s".to_string()];
        for name in &self.junction_names {
            header.push(format!("phase_{name}_rad"));
            header.push(format!("v_{name}_V"));
            header.push(format!("i_{name}_A"));
        }
        for name in &self.inductor_names {
            header.push(format!("i_{name}_A"));
        }
        for n in 0..self.node_voltage.len() {
            header.push(format!("v_node{}_V", n + 1));
        }
        writeln!(w, "{}", header.join(","))?;
        for s in 0..self.len() {
            let mut row = vec![fmt(self.time[s])];
            for k in 0..self.junction_names.len() {
                row.push(fmt(self.phase[k][s]));
                row.push(fmt(self.voltage[k][s]));
                row.push(fmt(self.junction_current[k][s]));
            }
            for l in 0..self.inductor_names.len() {
                row.push(fmt(self.inductor_current[l][s]));
            }
            for n in &self.node_voltage {
                row.push(fmt(n[s]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

/// Net windings of `junction` over `trace`.
pub fn count_fluxons(trace: &Trace, junction: &str) -> Result<i64> {
    trace.count_fluxons(junction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_trace(total: f64, samples: usize) -> Trace {
        let mut t = Trace::new(vec!["J".into()], vec![], 1);
        for i in 0..=samples {
            let x = i as f64 / samples as f64;
            t.time.push(x * 1e-9);
            t.phase[0].push(total * x);
            t.voltage[0].push(0.0);
            t.junction_current[0].push(0.0);
            t.node_voltage[0].push(0.0);
            t.kcl_residual.push(0.0);
        }
        t
    }

    #[test]
    fn winding_counts() {
        assert_eq!(count_fluxons(&ramp_trace(6.0 * PI, 100), "J").unwrap(), 3);
        assert_eq!(count_fluxons(&ramp_trace(0.0, 10), "J").unwrap(), 0);
        assert!(matches!(count_fluxons(&ramp_trace(0.0, 10), "X"), Err(SimError::UnknownId(_))));
    }

    #[test]
    fn resampling_keeps_endpoints() {
        let t = ramp_trace(20.0 * PI, 1000);
        let r = t.resampled(7);
        assert_eq!(r.time.last(), t.time.last());
        assert_eq!(r.count_fluxons("J").unwrap(), 10);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let t = ramp_trace(2.0 * PI, 4);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "time_s,phase_J_rad,v_J_V,i_J_A,v_node1_V");
        assert_eq!(lines.len(), 6);
    }
}
