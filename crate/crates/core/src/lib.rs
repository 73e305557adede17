//! Multi-robot frontier exploration under intermittent communication.
//!
//! Robots follow a rendezvous plan: an agreement matrix saying which
//! sub-teams meet, in which order, and a steps matrix saying how long each
//! member explores before heading to the meeting. Plans are scored as
//! job-shop schedules and generated with a genetic algorithm; the simulator
//! runs them against base-station and relay-network baselines.

pub mod comms;
pub mod config;
pub mod engine;
pub mod gridworld;
pub mod maps;
pub mod plan;
pub mod policy;
pub mod solver;

pub use gridworld::{CellState, FrontierSet, GridMap, Pose};
