//! Scenario-driven front end: load a scenario description, run the
//! certificates and the simulation, emit a trace and a summary report.

pub mod builtin;
pub mod output;
pub mod runner;
pub mod scenario;
