//! Simulation of superconducting optoelectronic loop neurons.
//!
//! Two tiers share one parameter set. The device tier integrates the
//! Josephson/detector circuit templates in time ([`junction`],
//! [`templates`]); the behavioral tier replaces them with calibrated closed
//! forms ([`synapse`], [`neuron`]) so that networks of thousands of neurons
//! can be run event by event ([`network`]) with energy and power accounting.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod devices;
pub mod error;
pub mod junction;
pub mod network;
pub mod neuron;
pub mod rng;
pub mod synapse;
pub mod templates;

pub use constants::PhysicalConstants;
pub use error::{Result, SimError};
