//! Device tier: junction circuits, the transient solver and fluxon counting.

mod circuit;
mod params;
mod solver;
mod trace;

pub use circuit::{Drive, Element, LoopCircuit, MutualCoupling, NodeId, ResistancePulse};
pub use params::{loop_storage_capacity, rsj_mean_voltage, JunctionParams};
pub use solver::{integrate_transient, Method, SolverConfig};
pub use trace::{count_fluxons, PhaseSlip, SolverStats, Trace};
