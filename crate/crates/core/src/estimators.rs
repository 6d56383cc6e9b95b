//! The three estimators for the noisy-operator model, the data-driven level
//! rule and the minimax rate exponents.
//!
//! * Linear Galerkin: solve `K_{delta,j} u = P_j g` on `V_j`, with an optional
//!   cutoff returning zero when `||K_{delta,j}^{-1}|| > tau 2^{jt}`.
//! * Nonlinear I (invert, then smooth): the linear estimate at level `j1`
//!   followed by level-dependent hard thresholding, either with the
//!   theoretical `kappa 2^{|lambda| t} x sqrt((|lambda|-j0)_+)` thresholds or
//!   with factors read off the observed singular-value decay.
//! * Nonlinear II (smooth, then invert): entrywise hard thresholding of the
//!   operator block at `T(delta)` and of the data at `T(epsilon)` with
//!   `T(x) = kappa x sqrt(|log x|)`, then one Galerkin solve on `V_J`.
//!
//! Thresholds use the natural logarithm; constants are absorbed into `kappa`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use nalgebra::DVector;

use crate::linalg;
use crate::operators::{GalerkinMatrix, OperatorError};
use crate::simulate::Observation;
use crate::wavelet::{dim_v, level_of_flat, CoeffVector};

/// Errors from estimation.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    /// The Galerkin block is numerically singular and no cutoff was supplied.
    SingularSystem,
    /// Requested level outside the observation's resolution.
    LevelOutOfRange { level: i32, max_level: i32 },
    /// Threshold scale outside `(0, 1)`.
    NoiseScaleOutOfRange { value: f64 },
    /// Malformed estimator specification.
    InvalidSpec { what: &'static str },
    /// Rate exponent parameter outside its domain.
    InvalidRateParameter { what: &'static str },
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::SingularSystem => {
                write!(f, "Galerkin block is numerically singular (no cutoff configured)")
            }
            EstimatorError::LevelOutOfRange { level, max_level } => {
                write!(f, "level {level} outside -1..={max_level}")
            }
            EstimatorError::NoiseScaleOutOfRange { value } => {
                write!(f, "threshold noise scale must lie in (0, 1), got {value}")
            }
            EstimatorError::InvalidSpec { what } => write!(f, "invalid spec: {what}"),
            EstimatorError::InvalidRateParameter { what } => {
                write!(f, "invalid rate parameter: {what}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EstimatorError {}

impl From<OperatorError> for EstimatorError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Singular => EstimatorError::SingularSystem,
            OperatorError::LevelOutOfRange { level, max_level } => {
                EstimatorError::LevelOutOfRange { level, max_level }
            }
            _ => EstimatorError::InvalidSpec {
                what: "operator construction failed",
            },
        }
    }
}

/// Linear Galerkin estimator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpec {
    /// Projection level `j >= -1`.
    pub j: i32,
    /// Degree of ill-posedness used by the cutoff.
    pub t: f64,
    /// Cutoff: return zero when `||K_{delta,j}^{-1}|| > tau 2^{jt}`. Absent by
    /// default; one-sample practice abandons the cutoff.
    pub tau: Option<f64>,
}

/// Threshold construction for Nonlinear Estimation I.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `kappa 2^{|lambda| t} x sqrt((|lambda| - j0)_+)`.
    Theoretical,
    /// Per-level factor from the observed singular-value decay of
    /// `K_{delta,j1}` (geometric mean per level band, normalized to 1 at
    /// `j0`), without the sqrt correction.
    EmpiricalDecay,
}

/// Nonlinear Estimation I parameters (invert then threshold).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nl1Spec {
    pub j0: i32,
    pub j1: i32,
    pub kappa: f64,
    pub t: f64,
    pub tau: Option<f64>,
    pub threshold_mode: ThresholdMode,
}

/// Nonlinear Estimation II parameters (threshold then invert).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nl2Spec {
    /// Inversion space level `J >= 0`.
    pub j: i32,
    pub kappa_op: f64,
    pub kappa_data: f64,
    pub t: f64,
    pub tau: Option<f64>,
}

/// Per-run diagnostics attached to every estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Level the inversion ran at.
    pub used_level: i32,
    /// Coefficients surviving thresholding (all of them for the linear method).
    pub kept_coefficient_count: usize,
    /// Operator entries used by the inversion (post-thresholding for NL-II).
    pub kept_operator_entry_count: usize,
    /// The inverse-norm proxy the method's gate looked at: `1/min_sv` for the
    /// linear path, the `H^t -> L^2` inverse norm for NL-II.
    pub inv_norm: f64,
}

/// Estimator output. `cutoff_triggered` implies `f = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub f: CoeffVector,
    pub cutoff_triggered: bool,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    fn cutoff(max_level: i32, used_level: i32, inv_norm: f64) -> Self {
        Estimate {
            f: CoeffVector::zeros(max_level),
            cutoff_triggered: true,
            diagnostics: Diagnostics {
                used_level,
                kept_coefficient_count: 0,
                kept_operator_entry_count: 0,
                inv_norm,
            },
        }
    }
}

/// Dense-case rate exponent `r(s, t, d) = 2s / (2s + 2t + d)`.
pub fn rate_exponent_dense(s: f64, t: f64, d: u32) -> Result<f64, EstimatorError> {
    if !(s > 0.0) {
        return Err(EstimatorError::InvalidRateParameter { what: "s must be > 0" });
    }
    if !(t > 0.0) {
        return Err(EstimatorError::InvalidRateParameter { what: "t must be > 0" });
    }
    if d == 0 {
        return Err(EstimatorError::InvalidRateParameter { what: "d must be >= 1" });
    }
    let d = f64::from(d);
    Ok(2.0 * s / (2.0 * s + 2.0 * t + d))
}

/// Dense/sparse classification of `(s, p)` by the critical line
/// `1/p = 1/2 + s/(2t + d)`; the boundary counts as sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Dense,
    Sparse,
}

/// Sparse-case rate exponent and regime classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseRate {
    /// `(s + d/2 - d/p) / (s + t + d/2 - d/p)`.
    pub exponent: f64,
    pub regime: Regime,
}

pub fn rate_exponent_sparse(s: f64, p: f64, t: f64, d: u32) -> Result<SparseRate, EstimatorError> {
    if !(s > 0.0) || !(t > 0.0) || d == 0 || !(p > 0.0) {
        return Err(EstimatorError::InvalidRateParameter {
            what: "need s > 0, t > 0, p > 0, d >= 1",
        });
    }
    let d = f64::from(d);
    let shift = s + d / 2.0 - d / p;
    if shift < 0.0 {
        // Sobolev embedding into L^2 fails
        return Err(EstimatorError::InvalidRateParameter {
            what: "embedding requires s - d/p + d/2 >= 0",
        });
    }
    let regime = if 1.0 / p < 0.5 + s / (2.0 * t + d) {
        Regime::Dense
    } else {
        Regime::Sparse
    };
    Ok(SparseRate {
        exponent: shift / (shift + t),
        regime,
    })
}

/// Oracle projection level for the dense rate: `2^j ~ noise^{-2/(2s+2t+d)}`,
/// floored to an integer level (never below 0).
pub fn oracle_level(noise: f64, s: f64, t: f64, d: u32) -> i32 {
    debug_assert!(noise > 0.0 && noise < 1.0);
    let expo = -2.0 * libm::log2(noise) / (2.0 * s + 2.0 * t + f64::from(d));
    let j = libm::floor(expo) as i32;
    j.max(0)
}

/// Adaptive inversion level `2^J ~ c0 * min(eps^{-1/t}, (delta
/// sqrt|log delta|)^{-1/(t+d)})`, floored; `c0` defaults to 1 and must not be
/// chosen large.
pub fn adaptive_level(epsilon: f64, delta: f64, t: f64, d: u32, c0: f64) -> i32 {
    debug_assert!(epsilon > 0.0 || delta > 0.0);
    let from_eps = if epsilon > 0.0 {
        libm::pow(epsilon, -1.0 / t)
    } else {
        f64::INFINITY
    };
    let from_delta = if delta > 0.0 && delta < 1.0 {
        libm::pow(delta * libm::sqrt(libm::fabs(libm::log(delta))), -1.0 / (t + f64::from(d)))
    } else {
        f64::INFINITY
    };
    let target = c0 * from_eps.min(from_delta);
    (libm::floor(libm::log2(target)) as i32).max(0)
}

/// Which flavor of the sequential level rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RuleVariant {
    /// Compare against `c * delta * dim(V_{j+1})`.
    #[default]
    Dim,
    /// Compare against `c * delta * sqrt(dim(V_{j+1}))`.
    SqrtDim,
}

/// Sequential data-driven choice of the inversion level:
/// `J = min { j >= 0 : lambda_min(K_{delta,j+1}) < c delta dim(V_{j+1}) }`,
/// returning `j_cap` when no level triggers below the cap.
///
/// `lambda_min` is the smallest eigenvalue of the symmetrized block (the
/// observed matrix is not exactly symmetric). `builder(j)` must return the
/// noisy Galerkin projection onto `V_j`.
pub fn select_level<F>(mut builder: F, delta: f64, c: f64, j_cap: i32, variant: RuleVariant) -> i32
where
    F: FnMut(i32) -> GalerkinMatrix,
{
    debug_assert!(delta > 0.0 && c > 0.0);
    for j in 0..j_cap {
        let block = builder(j + 1);
        let lmin = block.min_eig_symmetrized();
        let dim = dim_v(j + 1) as f64;
        let rhs = match variant {
            RuleVariant::Dim => c * delta * dim,
            RuleVariant::SqrtDim => c * delta * libm::sqrt(dim),
        };
        if lmin < rhs {
            return j;
        }
    }
    j_cap
}

/// [`select_level`] driven by submatrices of one observed operator, capped at
/// its resolution.
pub fn select_level_from(
    k_delta: &GalerkinMatrix,
    delta: f64,
    c: f64,
    j_cap: i32,
    variant: RuleVariant,
) -> i32 {
    let cap = j_cap.min(k_delta.max_level() - 1);
    select_level(
        |j| k_delta.submatrix(j).expect("level capped to resolution"),
        delta,
        c,
        cap,
        variant,
    )
}

/// Largest level `j <= cap` whose entry-thresholded block is numerically
/// invertible. Practical stand-in for the cutoff when only one sample is
/// available: pick the inversion space small enough that thresholding leaves
/// a solvable system (fine-level diagonal entries of the stiffness matrix
/// decay like `2^{-jt}` and drop below `T(delta)` once `j` is too large).
pub fn nl2_invertible_level(
    k_delta: &GalerkinMatrix,
    delta: f64,
    kappa_op: f64,
    cap: i32,
) -> i32 {
    let cap = cap.min(k_delta.max_level());
    for j in (0..=cap).rev() {
        let block = k_delta.submatrix(j).expect("level capped to resolution");
        let thresholded = if delta > 0.0 && delta < 1.0 {
            match threshold_operator_entries(&block, delta, kappa_op) {
                Ok((m, _)) => m,
                Err(_) => continue,
            }
        } else {
            block
        };
        // a fully-zeroed row or column decides singularity without an SVD;
        // this is the common way over-large levels die (fine-level diagonal
        // entries fall below the threshold wholesale)
        let e = thresholded.entries();
        let n = e.nrows();
        let has_dead_line = (0..n).any(|r| (0..n).all(|c| e[(r, c)] == 0.0))
            || (0..n).any(|c| (0..n).all(|r| e[(r, c)] == 0.0));
        if has_dead_line {
            continue;
        }
        let (smax, smin) = linalg::svd_extremes(e);
        if smin > linalg::SINGULARITY_RATIO * smax {
            return j;
        }
    }
    0
}

/// Hard-thresholding scale `T(x) = kappa x sqrt(|log x|)` (natural log).
pub fn threshold_scale(x: f64, kappa: f64) -> f64 {
    kappa * x * libm::sqrt(libm::fabs(libm::log(x)))
}

/// Level-dependent hard thresholding: keep `c_lambda` iff
/// `|c_lambda| >= kappa 2^{|lambda| t} x sqrt((|lambda| - j0)_+)` and
/// `|lambda| <= j1`. Levels at or below `j0` always survive.
pub fn threshold_level_dependent(
    coeffs: &CoeffVector,
    x: f64,
    kappa: f64,
    t: f64,
    j0: i32,
    j1: i32,
) -> CoeffVector {
    debug_assert!(j0 < j1 && j1 <= coeffs.max_level());
    let mut out = coeffs.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let level = level_of_flat(i);
        if level > j1 {
            *v = 0.0;
            continue;
        }
        let excess = (level - j0).max(0) as f64;
        let thr = kappa * libm::exp2(level as f64 * t) * x * libm::sqrt(excess);
        if v.abs() < thr {
            *v = 0.0;
        }
    }
    out
}

/// Entrywise hard thresholding of an operator block at `T(delta)`.
/// Returns the compressed matrix and the surviving entry count.
pub fn threshold_operator_entries(
    k: &GalerkinMatrix,
    delta: f64,
    kappa: f64,
) -> Result<(GalerkinMatrix, usize), EstimatorError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(EstimatorError::NoiseScaleOutOfRange { value: delta });
    }
    let thr = threshold_scale(delta, kappa);
    let mut entries = k.entries().clone();
    let mut kept = 0usize;
    for v in entries.iter_mut() {
        if v.abs() < thr {
            *v = 0.0;
        } else {
            kept += 1;
        }
    }
    let out = GalerkinMatrix::from_entries(k.max_level(), k.illposedness(), k.kind(), entries)
        .expect("shape preserved");
    Ok((out, kept))
}

/// Classical hard thresholding of data coefficients at `T(epsilon)`,
/// restricted to levels `<= j`. Returns the vector and the surviving count.
pub fn threshold_data(
    g: &CoeffVector,
    epsilon: f64,
    kappa: f64,
    j: i32,
) -> Result<(CoeffVector, usize), EstimatorError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(EstimatorError::NoiseScaleOutOfRange { value: epsilon });
    }
    let thr = threshold_scale(epsilon, kappa);
    let mut out = g.clone();
    let mut kept = 0usize;
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        if level_of_flat(i) > j || v.abs() < thr {
            *v = 0.0;
        } else if *v != 0.0 {
            kept += 1;
        }
    }
    Ok((out, kept))
}

/// Solve the `V_j` Galerkin system on the noisy operator block.
fn solve_block(
    obs: &Observation,
    j: i32,
    t: f64,
    tau: Option<f64>,
) -> Result<(Estimate, GalerkinMatrix), EstimatorError> {
    let max_level = obs.g.max_level();
    if j < -1 || j > max_level {
        return Err(EstimatorError::LevelOutOfRange { level: j, max_level });
    }
    let block = obs.k_delta.submatrix(j)?;
    let n = block.dim();
    let (smax, smin) = linalg::svd_extremes(block.entries());
    let inv_norm = if smin > 0.0 { 1.0 / smin } else { f64::INFINITY };
    if let Some(tau) = tau {
        if inv_norm > tau * libm::exp2(j as f64 * t) {
            return Ok((Estimate::cutoff(max_level, j, inv_norm), block));
        }
    }
    if !(smin > linalg::SINGULARITY_RATIO * smax) {
        return Err(EstimatorError::SingularSystem);
    }
    let rhs = DVector::from_column_slice(&obs.g.values()[..n]);
    let sol = linalg::lu_solve(block.entries(), &rhs).ok_or(EstimatorError::SingularSystem)?;
    let mut values = vec![0.0; obs.g.len()];
    values[..n].copy_from_slice(sol.as_slice());
    let f = CoeffVector::from_values(max_level, values).expect("length preserved");
    Ok((
        Estimate {
            f,
            cutoff_triggered: false,
            diagnostics: Diagnostics {
                used_level: j,
                kept_coefficient_count: n,
                kept_operator_entry_count: n * n,
                inv_norm,
            },
        },
        block,
    ))
}

/// Linear Galerkin estimator: `K_{delta,j}^{-1} P_j g`, zero when the cutoff
/// trips.
pub fn linear_galerkin(obs: &Observation, spec: &LinearSpec) -> Result<Estimate, EstimatorError> {
    let (estimate, _) = solve_block(obs, spec.j, spec.t, spec.tau)?;
    Ok(estimate)
}

/// Per-level threshold factors for the empirical-decay mode: the reciprocal
/// of the geometric mean of the singular values attributed to each level band
/// (descending values assigned positionally in level-major order), normalized
/// so the band of `j0` has factor 1.
fn empirical_decay_factors(block: &GalerkinMatrix, j0: i32) -> Vec<f64> {
    let sv = block.singular_values();
    let j1 = block.max_level();
    let mut log_gm = Vec::with_capacity((j1 + 2) as usize);
    for level in -1..=j1 {
        let (lo, hi) = if level < 0 {
            (0usize, 1usize)
        } else {
            (1usize << level, 1usize << (level + 1))
        };
        let band = &sv[lo..hi];
        let m = band.iter().map(|v| libm::log(v.max(f64::MIN_POSITIVE))).sum::<f64>()
            / band.len() as f64;
        log_gm.push(m);
    }
    let base = log_gm[(j0 + 1) as usize];
    log_gm.iter().map(|m| libm::exp(base - m)).collect()
}

/// Nonlinear Estimation I: undersmoothed linear estimate at `j1`, then
/// level-dependent hard thresholding at scale `x = max(delta, epsilon)`.
pub fn nl1_estimate(obs: &Observation, spec: &Nl1Spec) -> Result<Estimate, EstimatorError> {
    if spec.j0 < -1 || spec.j0 >= spec.j1 {
        return Err(EstimatorError::InvalidSpec { what: "need -1 <= j0 < j1" });
    }
    if !(spec.kappa > 0.0) {
        return Err(EstimatorError::InvalidSpec { what: "kappa must be > 0" });
    }
    let (linear, block) = solve_block(obs, spec.j1, spec.t, spec.tau)?;
    if linear.cutoff_triggered {
        return Ok(linear);
    }
    let x = obs.delta.max(obs.epsilon);
    let thresholded = match spec.threshold_mode {
        ThresholdMode::Theoretical => {
            threshold_level_dependent(&linear.f, x, spec.kappa, spec.t, spec.j0, spec.j1)
        }
        ThresholdMode::EmpiricalDecay => {
            let factors = empirical_decay_factors(&block, spec.j0);
            let mut out = linear.f.clone();
            for (i, v) in out.values_mut().iter_mut().enumerate() {
                let level = level_of_flat(i);
                if level > spec.j1 {
                    *v = 0.0;
                    continue;
                }
                let thr = spec.kappa * x * factors[(level + 1) as usize];
                if v.abs() < thr {
                    *v = 0.0;
                }
            }
            out
        }
    };
    let kept = thresholded.values().iter().filter(|v| **v != 0.0).count();
    let diagnostics = Diagnostics {
        kept_coefficient_count: kept,
        ..linear.diagnostics
    };
    Ok(Estimate {
        f: thresholded,
        cutoff_triggered: false,
        diagnostics,
    })
}

/// Nonlinear Estimation II: threshold the operator block and the data, then
/// invert on `V_J`. With `tau` present the estimator returns zero when the
/// `H^t -> L^2` norm of the compressed inverse exceeds `tau` (or the block is
/// singular); without `tau` a singular block is an error.
///
/// Noise scales of exactly zero skip the corresponding thresholding step
/// (`T(x) -> 0` as `x -> 0`).
pub fn nl2_estimate(obs: &Observation, spec: &Nl2Spec) -> Result<Estimate, EstimatorError> {
    if spec.j < 0 {
        return Err(EstimatorError::InvalidSpec { what: "J must be >= 0" });
    }
    if !(spec.kappa_op > 0.0) || !(spec.kappa_data > 0.0) {
        return Err(EstimatorError::InvalidSpec { what: "kappas must be > 0" });
    }
    let max_level = obs.g.max_level();
    if spec.j > max_level {
        return Err(EstimatorError::LevelOutOfRange {
            level: spec.j,
            max_level,
        });
    }
    let block = obs.k_delta.submatrix(spec.j)?;
    let n = block.dim();
    let (k_hat, kept_entries) = if obs.delta > 0.0 {
        threshold_operator_entries(&block, obs.delta, spec.kappa_op)?
    } else {
        (block, n * n)
    };
    let (g_hat, kept_coeffs) = if obs.epsilon > 0.0 {
        threshold_data(&obs.g, obs.epsilon, spec.kappa_data, spec.j)?
    } else {
        let g = obs.g.project_level(spec.j).expect("level checked");
        let kept = g.values().iter().filter(|v| **v != 0.0).count();
        (g, kept)
    };

    let norms = match k_hat.operator_norms(spec.t) {
        Ok(norms) => norms,
        Err(OperatorError::Singular) => {
            return if spec.tau.is_some() {
                Ok(Estimate::cutoff(max_level, spec.j, f64::INFINITY))
            } else {
                Err(EstimatorError::SingularSystem)
            };
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(tau) = spec.tau {
        if norms.inv_ht_norm > tau {
            return Ok(Estimate::cutoff(max_level, spec.j, norms.inv_ht_norm));
        }
    }
    let rhs = DVector::from_column_slice(&g_hat.values()[..n]);
    let sol = linalg::lu_solve(k_hat.entries(), &rhs).ok_or(EstimatorError::SingularSystem)?;
    let mut values = vec![0.0; obs.g.len()];
    values[..n].copy_from_slice(sol.as_slice());
    Ok(Estimate {
        f: CoeffVector::from_values(max_level, values).expect("length preserved"),
        cutoff_triggered: false,
        diagnostics: Diagnostics {
            used_level: spec.j,
            kept_coefficient_count: kept_coeffs,
            kept_operator_entry_count: kept_entries,
            inv_norm: norms.inv_ht_norm,
        },
    })
}
