//! Seeded two-slice radio resource allocation simulator with tabular
//! reinforcement-learning controllers.
//!
//! A base station splits its resource block groups between an eMBB slice and
//! a URLLC slice every TTI. The [`env`] module simulates traffic, channel,
//! HARQ and delay accounting; [`agents`] holds the Q-learning family of
//! controllers; [`harness`] runs experiments and writes reports.

pub mod agents;
pub mod config;
pub mod env;
pub mod harness;
pub mod radio;
pub mod rng;

pub use config::{default_scenario, load_scenario, load_scenario_file, Algorithm, ScenarioConfig};
