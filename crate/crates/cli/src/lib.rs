//! Command-line runner: scenario simulation, parameter sweeps, condition
//! verification and reproducible output bundles.

pub mod config;
pub mod reproduce;
pub mod simulate;
pub mod sweep;
pub mod verify;
