//! Power-efficient resource allocation for multicarrier NOMA downlink with
//! statistical channel knowledge.
//!
//! * [`channel`]: fading statistics and the QoS-stringency coefficient.
//! * [`power`]: closed-form pair allocation, decoding order, OMA comparison.
//! * [`scheduling`]: clustering-based pairing heuristic plus exact and random baselines.
//! * [`montecarlo`]: empirical outage checks against the analytic model.
//! * [`experiments`]: scenario generation and parameter sweeps.
//! * [`cli`]: the `mcnoma` command-line front end.

pub mod channel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod power;
pub mod scheduling;
pub mod rng;

pub use error::{Error, Result};
