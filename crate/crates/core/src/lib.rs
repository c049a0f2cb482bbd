//! Discrete-time hybrid agent-based simulator for on-demand battery
//! delivery ("charging as a service") to electric mobility fleets.

pub mod demand;
pub mod dispatch;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod export;
pub mod metrics;
pub mod request;
pub mod scenario;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
