//! Experiment config files: a flat TOML document mirroring
//! [`ExperimentConfig`](crate::harness::ExperimentConfig) field names.
//!
//! ```toml
//! j_max = 10
//! delta_grid = [1e-3]
//! epsilon_grid = [1e-5]
//! replications = 20
//! base_seed = 1
//!
//! [kernel]
//! kind = "log-potential"
//!
//! [signal]
//! kind = "tent"
//!
//! [[methods]]
//! kind = "linear"
//! j = 5
//! t = 1.0
//! ```

use std::path::Path;

use crate::harness::{ExperimentConfig, HarnessError};

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let body = std::fs::read_to_string(path)?;
    let config: ExperimentConfig =
        toml::from_str(&body).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Serialize a config back to TOML (used to record provenance next to runs).
pub fn to_toml(config: &ExperimentConfig) -> Result<String, HarnessError> {
    toml::to_string_pretty(config).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
}
