//! Harness, file formats and CLI plumbing for the invwave estimators.
//!
//! The algorithmic core lives in `invwave-core`; this crate adds everything
//! that touches the OS: the Monte Carlo experiment runner, observation
//! bundles on disk, TOML experiment configs and report emission.

pub mod bundle;
pub mod config;
pub mod harness;
