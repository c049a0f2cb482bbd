//! Tick-driven fleet simulation.

mod vehicle;
mod world;

pub use vehicle::{Leg, ServiceVehicle, SvState};
pub use world::{audit_insertions, FleetEvent, InsertionRecord, RunOutput, SimConfig, TickReport, World};
