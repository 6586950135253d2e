//! Rate and fidelity model of an asynchronous post-matching quantum repeater.
//!
//! Elementary links pair two heralded single-photon interference events into
//! one Bell pair. Pairs are then connected by nested entanglement swapping,
//! optionally with Oxford distillation rounds at each nesting level, under a
//! depolarizing two-qubit gate model. SPI- and TPI-heralded repeaters are
//! provided as baselines, and a Monte Carlo simulator checks the analytic
//! waiting times.

pub mod baselines;
pub mod chain;
pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod pairing;
pub mod qstate;
pub mod swap_distill;

pub use error::{Error, Result};
