//! Monte Carlo experiment runner: seeded replications over a noise grid,
//! RMSE scoring, rate-slope regression and report emission.
//!
//! Determinism contract: the replication seed is a pure function of
//! `(base_seed, noise-cell index, replication index)`, every method inside a
//! cell sees the same observation, and cells are merged in a fixed order, so
//! two runs of the same config produce identical numbers (wall-clock
//! telemetry excepted).

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use invwave_core::estimators::{
    self, LinearSpec, Nl1Spec, Nl2Spec, RuleVariant, ThresholdMode,
};
use invwave_core::operators::{build_diagonal, build_log_potential, GalerkinMatrix};
use invwave_core::simulate::{observe, synthesize_signal, Observation, SignalSpec};
use invwave_core::wavelet::{CoeffVector, MultiIndex, WaveletFilter};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("coefficient vectors have different resolutions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("rate fit needs at least {need} usable grid points, found {found}")]
    InsufficientPoints { need: usize, found: usize },
    #[error("no cells recorded for method '{0}'")]
    UnknownMethod(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Kernel selector for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelChoice {
    LogPotential,
    Diagonal { t: f64 },
}

impl KernelChoice {
    pub fn build(&self, j_max: i32, filter: &WaveletFilter) -> Result<GalerkinMatrix, HarnessError> {
        match self {
            KernelChoice::LogPotential => build_log_potential(j_max, filter)
                .map_err(|e| HarnessError::InvalidConfig(e.to_string())),
            KernelChoice::Diagonal { t } => build_diagonal(*t, j_max)
                .map_err(|e| HarnessError::InvalidConfig(e.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelChoice::LogPotential => "log-potential".into(),
            KernelChoice::Diagonal { t } => format!("diagonal(t={t})"),
        }
    }
}

/// Signal selector for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalChoice {
    Tent,
    Smooth { frequency: u32 },
    SingleWavelet { level: i32, position: u32 },
}

impl SignalChoice {
    pub fn to_spec(&self) -> Result<SignalSpec, HarnessError> {
        Ok(match self {
            SignalChoice::Tent => SignalSpec::Tent,
            SignalChoice::Smooth { frequency } => SignalSpec::Smooth(*frequency),
            SignalChoice::SingleWavelet { level, position } => SignalSpec::SingleWavelet(
                MultiIndex::new(*level, *position)
                    .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?,
            ),
        })
    }

    pub fn label(&self) -> String {
        match self {
            SignalChoice::Tent => "tent".into(),
            SignalChoice::Smooth { frequency } => format!("smooth({frequency})"),
            SignalChoice::SingleWavelet { level, position } => {
                format!("wavelet({level},{position})")
            }
        }
    }
}

/// How an estimator picks its projection level for a given observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelChoice {
    /// Fixed level.
    Fixed(i32),
    /// Sequential data-driven rule on the observed operator.
    Rule {
        rule_c: f64,
        #[serde(default)]
        sqrt_dim: bool,
        #[serde(default)]
        cap: Option<i32>,
    },
    /// Rate-oracle level `2^j ~ max(delta,eps)^{-2/(2s+2t+d)}`.
    RateOracle { oracle_s: f64 },
    /// Adaptive level `2^J ~ c0 min(eps^{-1/t}, (delta sqrt|log delta|)^{-1/(t+d)})`.
    Adaptive { adaptive_c0: f64 },
    /// Largest level whose entry-thresholded operator block stays invertible.
    Invertible {
        #[serde(default)]
        invertible_cap: Option<i32>,
    },
}

impl LevelChoice {
    fn describe(&self) -> String {
        match self {
            LevelChoice::Fixed(j) => format!("{j}"),
            LevelChoice::Rule { rule_c, sqrt_dim, .. } => {
                if *sqrt_dim {
                    format!("rule(c={rule_c},sqrt)")
                } else {
                    format!("rule(c={rule_c})")
                }
            }
            LevelChoice::RateOracle { oracle_s } => format!("oracle(s={oracle_s})"),
            LevelChoice::Adaptive { adaptive_c0 } => format!("adaptive(c0={adaptive_c0})"),
            LevelChoice::Invertible { .. } => "invertible".into(),
        }
    }

    /// Resolve against one observation. `t` is the method's ill-posedness
    /// degree, `kappa_op` the operator threshold constant (for the
    /// invertibility probe).
    pub fn resolve(&self, obs: &Observation, t: f64, kappa_op: f64) -> i32 {
        let j_max = obs.g.max_level();
        let j = match self {
            LevelChoice::Fixed(j) => *j,
            LevelChoice::Rule { rule_c, sqrt_dim, cap } => {
                let cap = cap.unwrap_or(j_max - 1).min(j_max - 1);
                if obs.delta > 0.0 {
                    let variant = if *sqrt_dim { RuleVariant::SqrtDim } else { RuleVariant::Dim };
                    estimators::select_level_from(&obs.k_delta, obs.delta, *rule_c, cap, variant)
                } else {
                    cap // the rule never triggers without operator noise
                }
            }
            LevelChoice::RateOracle { oracle_s } => {
                let noise = obs.delta.max(obs.epsilon);
                if noise > 0.0 && noise < 1.0 {
                    estimators::oracle_level(noise, *oracle_s, t, 1)
                } else {
                    j_max
                }
            }
            LevelChoice::Adaptive { adaptive_c0 } => {
                if obs.delta > 0.0 || obs.epsilon > 0.0 {
                    estimators::adaptive_level(obs.epsilon, obs.delta, t, 1, *adaptive_c0)
                } else {
                    j_max
                }
            }
            LevelChoice::Invertible { invertible_cap } => {
                let cap = invertible_cap.unwrap_or(j_max - 1).min(j_max);
                estimators::nl2_invertible_level(&obs.k_delta, obs.delta, kappa_op, cap)
            }
        };
        j.clamp(0, j_max)
    }
}

fn default_kappa() -> f64 {
    0.4
}

fn default_kappa_op() -> f64 {
    1.5
}

/// One estimator configuration inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodSpec {
    Linear {
        #[serde(default)]
        label: Option<String>,
        j: LevelChoice,
        t: f64,
        #[serde(default)]
        tau: Option<f64>,
    },
    Nl1 {
        #[serde(default)]
        label: Option<String>,
        j0: i32,
        j1: LevelChoice,
        #[serde(default = "default_kappa")]
        kappa: f64,
        t: f64,
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default)]
        empirical_decay: bool,
    },
    Nl2 {
        #[serde(default)]
        label: Option<String>,
        j: LevelChoice,
        #[serde(default = "default_kappa_op")]
        kappa_op: f64,
        #[serde(default = "default_kappa_op")]
        kappa_data: f64,
        t: f64,
        #[serde(default)]
        tau: Option<f64>,
    },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Linear { label, j, .. } => label
                .clone()
                .unwrap_or_else(|| format!("linear[j={}]", j.describe())),
            MethodSpec::Nl1 { label, j1, .. } => label
                .clone()
                .unwrap_or_else(|| format!("nl1[j1={}]", j1.describe())),
            MethodSpec::Nl2 { label, j, .. } => label
                .clone()
                .unwrap_or_else(|| format!("nl2[J={}]", j.describe())),
        }
    }

    /// Run on one observation; `(estimate-or-error, level used)`.
    pub fn run(
        &self,
        obs: &Observation,
    ) -> (Result<estimators::Estimate, estimators::EstimatorError>, i32) {
        match self {
            MethodSpec::Linear { j, t, tau, .. } => {
                let level = j.resolve(obs, *t, default_kappa_op());
                (
                    estimators::linear_galerkin(obs, &LinearSpec { j: level, t: *t, tau: *tau }),
                    level,
                )
            }
            MethodSpec::Nl1 { j0, j1, kappa, t, tau, empirical_decay, .. } => {
                let level = j1.resolve(obs, *t, default_kappa_op()).max(j0 + 1);
                let mode = if *empirical_decay {
                    ThresholdMode::EmpiricalDecay
                } else {
                    ThresholdMode::Theoretical
                };
                (
                    estimators::nl1_estimate(
                        obs,
                        &Nl1Spec {
                            j0: *j0,
                            j1: level,
                            kappa: *kappa,
                            t: *t,
                            tau: *tau,
                            threshold_mode: mode,
                        },
                    ),
                    level,
                )
            }
            MethodSpec::Nl2 { j, kappa_op, kappa_data, t, tau, .. } => {
                let level = j.resolve(obs, *t, *kappa_op);
                (
                    estimators::nl2_estimate(
                        obs,
                        &Nl2Spec {
                            j: level,
                            kappa_op: *kappa_op,
                            kappa_data: *kappa_data,
                            t: *t,
                            tau: *tau,
                        },
                    ),
                    level,
                )
            }
        }
    }
}

/// How the delta and epsilon grids combine into noise cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Cartesian product of the two grids.
    #[default]
    Product,
    /// `eps = delta` pointwise; with an empty epsilon grid the delta grid is
    /// reused, otherwise the grids must have equal length.
    Tied,
}

/// Full experiment description; mirrored 1:1 by the TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel: KernelChoice,
    pub signal: SignalChoice,
    #[serde(default = "default_wavelet_order")]
    pub wavelet_order: u32,
    pub j_max: i32,
    pub delta_grid: Vec<f64>,
    #[serde(default)]
    pub epsilon_grid: Vec<f64>,
    #[serde(default)]
    pub pairing: Pairing,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_wavelet_order() -> u32 {
    8
}

fn default_replications() -> u32 {
    20
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications == 0 {
            return Err(HarnessError::InvalidConfig("replications must be >= 1".into()));
        }
        if self.delta_grid.is_empty() {
            return Err(HarnessError::InvalidConfig("delta_grid must be nonempty".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::InvalidConfig("methods must be nonempty".into()));
        }
        let ok_noise = |v: f64| v == 0.0 || (v > 0.0 && v < 1.0);
        if !self.delta_grid.iter().copied().all(ok_noise)
            || !self.epsilon_grid.iter().copied().all(ok_noise)
        {
            return Err(HarnessError::InvalidConfig(
                "noise levels must lie in (0,1) or be 0".into(),
            ));
        }
        if self.pairing == Pairing::Tied
            && !self.epsilon_grid.is_empty()
            && self.epsilon_grid.len() != self.delta_grid.len()
        {
            return Err(HarnessError::InvalidConfig(
                "tied pairing needs equal grid lengths (or an empty epsilon_grid)".into(),
            ));
        }
        if self.pairing == Pairing::Product && self.epsilon_grid.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "product pairing needs a nonempty epsilon_grid".into(),
            ));
        }
        Ok(())
    }

    /// Noise cells in deterministic order.
    pub fn noise_cells(&self) -> Vec<(f64, f64)> {
        match self.pairing {
            Pairing::Product => {
                let mut out = Vec::new();
                for &d in &self.delta_grid {
                    for &e in &self.epsilon_grid {
                        out.push((d, e));
                    }
                }
                out
            }
            Pairing::Tied => {
                if self.epsilon_grid.is_empty() {
                    self.delta_grid.iter().map(|&d| (d, d)).collect()
                } else {
                    self.delta_grid
                        .iter()
                        .zip(&self.epsilon_grid)
                        .map(|(&d, &e)| (d, e))
                        .collect()
                }
            }
        }
    }

    /// SHA-256 of the canonical JSON serialization (first 16 hex chars).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Aggregate over replications of one `(delta, epsilon, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub delta: f64,
    pub epsilon: f64,
    pub method: String,
    /// Root of the mean squared `L^2` error across replications.
    pub rmse_mean: f64,
    /// Standard deviation of the per-replication errors.
    pub rmse_std: f64,
    pub per_replication_rmse: Vec<f64>,
    pub cutoff_rate: f64,
    pub failure_count: u32,
    pub chosen_level_histogram: BTreeMap<i32, u32>,
    pub chosen_j_mode: i32,
    pub wall_ms: u64,
}

/// Everything a run produced, reproducible from `config_hash` + `base_seed`
/// (wall-clock excepted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub config_hash: String,
    pub base_seed: u64,
    pub version: String,
}

/// Least-squares fit of `log rmse` against `log max(delta, eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theoretical_exponent: f64,
}

/// `L^2` distance between coefficient vectors (equals the function-space
/// distance by Parseval).
pub fn rmse(estimate: &CoeffVector, truth: &CoeffVector) -> Result<f64, HarnessError> {
    if estimate.len() != truth.len() {
        return Err(HarnessError::DimensionMismatch(estimate.len(), truth.len()));
    }
    Ok(estimate
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Replication seed derived from `(base, cell, rep)`; stable across runs.
pub fn derive_seed(base: u64, cell: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(base ^ cell.wrapping_mul(0xA24BAED4963EE407)) ^ rep)
}

struct RepOutcome {
    rmse: Option<f64>,
    cutoff: bool,
    failed: bool,
    level: i32,
    wall: Duration,
}

/// Run the full grid. Estimator failures are recorded per cell and never
/// abort the sweep.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let filter = WaveletFilter::daubechies(config.wavelet_order)
        .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let kernel = config.kernel.build(config.j_max, &filter)?;
    let truth = synthesize_signal(&config.signal.to_spec()?, config.j_max, &filter)
        .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;

    let mut cells = Vec::new();
    for (cell_idx, (delta, epsilon)) in config.noise_cells().into_iter().enumerate() {
        // every method sees the same observation per replication
        let rep_outcomes: Vec<Vec<RepOutcome>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(config.base_seed, cell_idx as u64, u64::from(rep));
                let obs = observe(&truth, &kernel, delta, epsilon, seed)
                    .expect("dimensions agree by construction");
                config
                    .methods
                    .iter()
                    .map(|method| {
                        let start = Instant::now();
                        let (result, level) = method.run(&obs);
                        let wall = start.elapsed();
                        match result {
                            Ok(est) => RepOutcome {
                                rmse: Some(rmse(&est.f, &obs.truth).expect("same resolution")),
                                cutoff: est.cutoff_triggered,
                                failed: false,
                                level,
                                wall,
                            },
                            Err(_) => RepOutcome {
                                rmse: None,
                                cutoff: false,
                                failed: true,
                                level,
                                wall,
                            },
                        }
                    })
                    .collect()
            })
            .collect();

        for (mi, method) in config.methods.iter().enumerate() {
            let outcomes: Vec<&RepOutcome> = rep_outcomes.iter().map(|reps| &reps[mi]).collect();
            let errs: Vec<f64> = outcomes.iter().filter_map(|o| o.rmse).collect();
            let rmse_mean = if errs.is_empty() {
                f64::NAN
            } else {
                (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
            };
            let rmse_std = if errs.len() < 2 {
                0.0
            } else {
                let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                    / (errs.len() - 1) as f64)
                    .sqrt()
            };
            let mut hist = BTreeMap::new();
            for o in &outcomes {
                *hist.entry(o.level).or_insert(0u32) += 1;
            }
            let chosen_j_mode = hist
                .iter()
                .max_by_key(|(_, count)| **count)
                .map(|(level, _)| *level)
                .unwrap_or(0);
            let wall: Duration = outcomes.iter().map(|o| o.wall).sum();
            cells.push(CellResult {
                delta,
                epsilon,
                method: method.label(),
                rmse_mean,
                rmse_std,
                per_replication_rmse: errs,
                cutoff_rate: outcomes.iter().filter(|o| o.cutoff).count() as f64
                    / outcomes.len() as f64,
                failure_count: outcomes.iter().filter(|o| o.failed).count() as u32,
                chosen_level_histogram: hist,
                chosen_j_mode,
                wall_ms: wall.as_millis() as u64,
            });
        }
    }
    Ok(ExperimentResult {
        cells,
        config_hash: config.hash(),
        base_seed: config.base_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Fit `log(rmse_mean)` against `log(max(delta, eps))` for one method.
pub fn fit_rate(
    result: &ExperimentResult,
    method: &str,
    s: f64,
    t: f64,
    d: u32,
) -> Result<RateFit, HarnessError> {
    let theoretical_exponent = estimators::rate_exponent_dense(s, t, d)
        .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let mut any = false;
    let mut pts = Vec::new();
    for cell in result.cells.iter().filter(|c| c.method == method) {
        any = true;
        let noise = cell.delta.max(cell.epsilon);
        if noise > 0.0 && cell.rmse_mean.is_finite() && cell.rmse_mean > 0.0 {
            pts.push((noise.ln(), cell.rmse_mean.ln()));
        }
    }
    if !any {
        return Err(HarnessError::UnknownMethod(method.to_string()));
    }
    if pts.len() < 4 {
        return Err(HarnessError::InsufficientPoints { need: 4, found: pts.len() });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_res: f64 = pts.iter().map(|p| {
        let pred = slope * p.0 + intercept;
        (p.1 - pred) * (p.1 - pred)
    }).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        theoretical_exponent,
    })
}

/// Report format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

/// Render the per-cell report. CSV is one row per cell with the fixed column
/// set; JSON mirrors the full result including per-replication errors.
pub fn render_report(result: &ExperimentResult, format: ReportFormat) -> Result<String, HarnessError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(result)?),
        ReportFormat::Csv => {
            let mut out = String::from(
                "delta,epsilon,method,rmse_mean,rmse_std,cutoff_rate,chosen_j_mode,wall_ms,seed\n",
            );
            for c in &result.cells {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    c.delta,
                    c.epsilon,
                    c.method,
                    c.rmse_mean,
                    c.rmse_std,
                    c.cutoff_rate,
                    c.chosen_j_mode,
                    c.wall_ms,
                    result.base_seed,
                ));
            }
            Ok(out)
        }
    }
}

/// Write the report to a file.
pub fn emit_report(
    result: &ExperimentResult,
    format: ReportFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    let body = render_report(result, format)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(body.as_bytes())?;
    Ok(())
}
