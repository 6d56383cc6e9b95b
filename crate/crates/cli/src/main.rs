//! `invwave` — simulate noisy-operator inverse problems, run the estimators,
//! and benchmark them over seeded Monte Carlo grids.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use invwave_cli::bundle;
use invwave_cli::config::load_config;
use invwave_cli::harness::{
    emit_report, fit_rate, render_report, rmse, run_monte_carlo, ExperimentConfig, KernelChoice,
    LevelChoice, MethodSpec, Pairing, ReportFormat, SignalChoice,
};
use invwave_core::estimators::{
    linear_galerkin, nl1_estimate, nl2_estimate, LinearSpec, Nl1Spec, Nl2Spec, ThresholdMode,
};
use invwave_core::simulate::{observe, synthesize_signal};
use invwave_core::wavelet::WaveletFilter;

#[derive(Parser)]
#[command(name = "invwave", version, about = "Wavelet-Galerkin estimation for inverse problems with a noisy operator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one observation (g, K_delta) and write it as a bundle directory.
    Simulate(SimulateArgs),
    /// Run one estimator on a stored observation bundle.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment described by a TOML config.
    Experiment(ExperimentArgs),
    /// Noise sweep with oracle levels plus a log-log rate fit.
    Rates(RatesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Kernel: log-potential | diagonal
    #[arg(long, default_value = "log-potential")]
    kernel: String,
    /// Degree of ill-posedness for the diagonal kernel.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Signal: tent | smooth:N | wavelet:LEVEL,POS
    #[arg(long, default_value = "tent")]
    signal: String,
    #[arg(long, default_value_t = 10)]
    j_max: i32,
    #[arg(long, default_value_t = 8)]
    wavelet_order: u32,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Bundle directory written by `simulate`.
    #[arg(long)]
    bundle: PathBuf,
    /// Estimator: linear | nl1 | nl2
    #[arg(long)]
    method: String,
    /// Level for the linear method: an integer or `rule`.
    #[arg(long)]
    j: Option<String>,
    /// Coarse level for nl1 (may be -1 for the scaling level).
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    j0: i32,
    /// Fine level for nl1: an integer or `rule`.
    #[arg(long)]
    j1: Option<String>,
    /// Inversion level for nl2: an integer, `rule`, or `invertible`.
    #[arg(long = "J")]
    j_big: Option<String>,
    #[arg(long, default_value_t = 0.4)]
    kappa: f64,
    #[arg(long, default_value_t = 1.5)]
    kappa_op: f64,
    #[arg(long, default_value_t = 1.5)]
    kappa_data: f64,
    #[arg(long)]
    tau: Option<f64>,
    /// Degree of ill-posedness.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Constant of the data-driven level rule.
    #[arg(long, default_value_t = 5.0)]
    rule_c: f64,
    /// Use the sqrt-dim variant of the level rule.
    #[arg(long, default_value_t = false)]
    sqrt_dim: bool,
    /// nl1 thresholds: theoretical | empirical
    #[arg(long, default_value = "theoretical")]
    threshold_mode: String,
    /// Output directory for estimate.csv + diagnostics.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Report file.
    #[arg(long)]
    out: PathBuf,
    /// csv | json
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RatesArgs {
    /// Smoothness used for the oracle levels and the predicted exponent.
    #[arg(long, default_value_t = 1.5)]
    s: f64,
    /// Degree of ill-posedness.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Largest noise level of the geometric grid.
    #[arg(long, default_value_t = 0.0625)]
    delta_max: f64,
    /// Ratio between consecutive grid points (0 < ratio < 1).
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 9)]
    points: u32,
    /// Data-noise handling: `tied` (eps = delta) or a fixed value (0 allowed).
    #[arg(long, default_value = "tied")]
    epsilon: String,
    #[arg(long, default_value_t = 50)]
    reps: u32,
    #[arg(long, default_value_t = 8)]
    j_max: i32,
    /// Cutoff for the linear solves (theoretical-mode safety).
    #[arg(long, default_value_t = 4.0)]
    tau: f64,
    /// Signal frequency for the smooth test signal.
    #[arg(long, default_value_t = 1)]
    frequency: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file for the sweep cells.
    #[arg(long)]
    out: PathBuf,
    /// csv | json
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

fn parse_signal(s: &str) -> Result<SignalChoice> {
    if s == "tent" {
        return Ok(SignalChoice::Tent);
    }
    if let Some(rest) = s.strip_prefix("smooth:") {
        return Ok(SignalChoice::Smooth { frequency: rest.parse().context("smooth:N needs an integer N")? });
    }
    if let Some(rest) = s.strip_prefix("wavelet:") {
        let (level, position) = rest
            .split_once(',')
            .context("wavelet:LEVEL,POS needs two integers")?;
        return Ok(SignalChoice::SingleWavelet {
            level: level.parse().context("bad wavelet level")?,
            position: position.parse().context("bad wavelet position")?,
        });
    }
    bail!("unknown signal '{s}' (expected tent, smooth:N or wavelet:J,K)")
}

fn parse_level(raw: Option<&str>, what: &str, rule_c: f64, sqrt_dim: bool) -> Result<LevelChoice> {
    let raw = raw.with_context(|| format!("--{what} is required for this method"))?;
    match raw {
        "rule" => Ok(LevelChoice::Rule { rule_c, sqrt_dim, cap: None }),
        "invertible" => Ok(LevelChoice::Invertible { invertible_cap: None }),
        other => Ok(LevelChoice::Fixed(
            other
                .parse()
                .with_context(|| format!("--{what} must be an integer, 'rule' or 'invertible'"))?,
        )),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let kernel = match args.kernel.as_str() {
        "log-potential" => KernelChoice::LogPotential,
        "diagonal" => KernelChoice::Diagonal { t: args.t },
        other => bail!("unknown kernel '{other}'"),
    };
    let signal = parse_signal(&args.signal)?;
    let filter = WaveletFilter::daubechies(args.wavelet_order)?;
    let k = kernel.build(args.j_max, &filter)?;
    let f = synthesize_signal(&signal.to_spec()?, args.j_max, &filter)?;
    let obs = observe(&f, &k, args.delta, args.epsilon, args.seed)?;
    bundle::write_observation(&args.out, &obs, &kernel.label(), &signal.label(), args.wavelet_order)?;
    println!(
        "wrote bundle to {} (J_max={}, delta={}, epsilon={}, seed={})",
        args.out.display(),
        args.j_max,
        args.delta,
        args.epsilon,
        args.seed
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let loaded = bundle::read_observation(&args.bundle)?;
    let obs = &loaded.observation;
    let (estimate, used_label) = match args.method.as_str() {
        "linear" => {
            let level = parse_level(args.j.as_deref(), "j", args.rule_c, args.sqrt_dim)?
                .resolve(obs, args.t, args.kappa_op);
            (
                linear_galerkin(obs, &LinearSpec { j: level, t: args.t, tau: args.tau })?,
                format!("linear[j={level}]"),
            )
        }
        "nl1" => {
            let level = parse_level(args.j1.as_deref(), "j1", args.rule_c, args.sqrt_dim)?
                .resolve(obs, args.t, args.kappa_op)
                .max(args.j0 + 1);
            let mode = match args.threshold_mode.as_str() {
                "theoretical" => ThresholdMode::Theoretical,
                "empirical" => ThresholdMode::EmpiricalDecay,
                other => bail!("unknown threshold mode '{other}'"),
            };
            (
                nl1_estimate(
                    obs,
                    &Nl1Spec {
                        j0: args.j0,
                        j1: level,
                        kappa: args.kappa,
                        t: args.t,
                        tau: args.tau,
                        threshold_mode: mode,
                    },
                )?,
                format!("nl1[j0={},j1={level}]", args.j0),
            )
        }
        "nl2" => {
            let level = parse_level(args.j_big.as_deref(), "J", args.rule_c, args.sqrt_dim)?
                .resolve(obs, args.t, args.kappa_op);
            (
                nl2_estimate(
                    obs,
                    &Nl2Spec {
                        j: level,
                        kappa_op: args.kappa_op,
                        kappa_data: args.kappa_data,
                        t: args.t,
                        tau: args.tau,
                    },
                )?,
                format!("nl2[J={level}]"),
            )
        }
        other => bail!("unknown method '{other}' (expected linear, nl1 or nl2)"),
    };

    std::fs::create_dir_all(&args.out)?;
    bundle::write_coeffs(&args.out.join("estimate.csv"), &estimate.f)?;
    let rmse_vs_truth = if loaded.truth_available {
        Some(rmse(&estimate.f, &obs.truth)?)
    } else {
        None
    };
    let diagnostics = serde_json::json!({
        "method": used_label,
        "used_level": estimate.diagnostics.used_level,
        "cutoff_triggered": estimate.cutoff_triggered,
        "kept_coefficient_count": estimate.diagnostics.kept_coefficient_count,
        "kept_operator_entry_count": estimate.diagnostics.kept_operator_entry_count,
        "inv_norm": estimate.diagnostics.inv_norm,
        "rmse_vs_truth": rmse_vs_truth,
        "delta": obs.delta,
        "epsilon": obs.epsilon,
        "seed": obs.seed,
    });
    std::fs::write(
        args.out.join("diagnostics.json"),
        serde_json::to_string_pretty(&diagnostics)?,
    )?;
    match rmse_vs_truth {
        Some(e) => println!("{used_label}: rmse vs truth = {e:.6}"),
        None => println!("{used_label}: done (no truth in bundle)"),
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    let result = run_monte_carlo(&config)?;
    emit_report(&result, args.format, &args.out)?;
    println!(
        "experiment {} ({} cells) -> {}",
        result.config_hash,
        result.cells.len(),
        args.out.display()
    );
    for cell in &result.cells {
        println!(
            "  delta={:<10} eps={:<10} {:<24} rmse={:.4} (std {:.4}, cutoff {:.0}%, J mode {})",
            cell.delta,
            cell.epsilon,
            cell.method,
            cell.rmse_mean,
            cell.rmse_std,
            100.0 * cell.cutoff_rate,
            cell.chosen_j_mode
        );
    }
    Ok(())
}

fn cmd_rates(args: RatesArgs) -> Result<()> {
    if !(args.ratio > 0.0 && args.ratio < 1.0) {
        bail!("--ratio must lie in (0, 1)");
    }
    let delta_grid: Vec<f64> = (0..args.points)
        .map(|i| args.delta_max * args.ratio.powi(i as i32))
        .collect();
    let epsilon_grid = match args.epsilon.as_str() {
        "tied" => Vec::new(), // tied pairing reuses the delta grid
        fixed => {
            let eps: f64 = fixed.parse().context("--epsilon must be 'tied' or a number")?;
            vec![eps; delta_grid.len()]
        }
    };
    let config = ExperimentConfig {
        kernel: KernelChoice::Diagonal { t: args.t },
        signal: SignalChoice::Smooth { frequency: args.frequency },
        wavelet_order: 8,
        j_max: args.j_max,
        delta_grid,
        epsilon_grid,
        pairing: Pairing::Tied,
        methods: vec![MethodSpec::Linear {
            label: Some("linear-oracle".into()),
            j: LevelChoice::RateOracle { oracle_s: args.s },
            t: args.t,
            tau: Some(args.tau),
        }],
        replications: args.reps,
        base_seed: args.seed,
    };
    let result = run_monte_carlo(&config)?;
    emit_report(&result, args.format, &args.out)?;
    let fit = fit_rate(&result, "linear-oracle", args.s, args.t, 1)?;
    println!("{}", render_report(&result, ReportFormat::Csv)?);
    println!(
        "fitted slope {:.4} (theoretical r(s,t,d) = {:.4}, R^2 = {:.3})",
        fit.slope, fit.theoretical_exponent, fit.r_squared
    );
    let fit_path = args.out.with_extension("fit.json");
    std::fs::write(&fit_path, serde_json::to_string_pretty(&fit)?)?;
    println!("fit -> {}", fit_path.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Rates(args) => cmd_rates(args),
    }
}
