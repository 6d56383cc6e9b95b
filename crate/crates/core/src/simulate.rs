//! Ground-truth signals and the observable pair `(g, K_delta)`.
//!
//! One user seed drives two independent ChaCha sub-streams (stream 1 for the
//! operator noise, stream 2 for the data noise), matching the model's
//! independence of the two noise sources while keeping every replication
//! reproducible from `(seed)` alone.

use alloc::vec::Vec;
use core::fmt;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::operators::GalerkinMatrix;
use crate::wavelet::{dim_v, dwt, CoeffVector, MultiIndex, WaveletError, WaveletFilter};

/// ChaCha stream id for data noise (operator noise uses stream 1).
const DATA_NOISE_STREAM: u64 = 2;

/// Ground-truth signal selector.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    /// `f(x) = max(1 - 30 |x - 1/2|, 0)`, a spike that defeats linear methods.
    Tent,
    /// Unit coefficient at one wavelet label.
    SingleWavelet(MultiIndex),
    /// `f(x) = cos(2 pi n x)`.
    Smooth(u32),
    /// Raw samples on the midpoint grid (length `2^(J_max+1)`), unscaled.
    Custom(Vec<f64>),
}

/// Errors from signal synthesis and observation.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulateError {
    /// Tent needs `J_max >= 5` to resolve its support.
    ResolutionTooCoarse { j_max: i32, min: i32 },
    /// Wavelet label outside the requested resolution.
    LabelOutOfRange { level: i32, j_max: i32 },
    /// Custom samples must have length `2^(J_max+1)`.
    SampleLengthMismatch { len: usize, expected: usize },
    /// Signal and operator dimensions disagree.
    DimensionMismatch { signal: usize, operator: usize },
    /// Noise levels must be nonnegative.
    NegativeNoise,
    Wavelet(WaveletError),
}

impl fmt::Display for SimulateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimulateError::ResolutionTooCoarse { j_max, min } => {
                write!(f, "J_max = {j_max} too coarse for this signal (need >= {min})")
            }
            SimulateError::LabelOutOfRange { level, j_max } => {
                write!(f, "wavelet level {level} exceeds J_max = {j_max}")
            }
            SimulateError::SampleLengthMismatch { len, expected } => {
                write!(f, "custom samples have length {len}, expected {expected}")
            }
            SimulateError::DimensionMismatch { signal, operator } => {
                write!(f, "signal dim {signal} != operator dim {operator}")
            }
            SimulateError::NegativeNoise => write!(f, "noise levels must be >= 0"),
            SimulateError::Wavelet(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimulateError {}

impl From<WaveletError> for SimulateError {
    fn from(e: WaveletError) -> Self {
        SimulateError::Wavelet(e)
    }
}

/// Everything the estimators may look at, plus the retained truth for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Noisy data coefficients `g = K f + eps z`.
    pub g: CoeffVector,
    /// Noisy operator `K + delta Xi`.
    pub k_delta: GalerkinMatrix,
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Ground truth, for scoring only; estimators must not read it.
    pub truth: CoeffVector,
}

/// Synthesize an `L^2`-normalized coefficient vector on `V_{J_max}`.
pub fn synthesize_signal(
    spec: &SignalSpec,
    j_max: i32,
    filter: &WaveletFilter,
) -> Result<CoeffVector, SimulateError> {
    let n = dim_v(j_max);
    let h = 1.0 / n as f64;
    let sqrt_h = libm::sqrt(h);
    match spec {
        SignalSpec::Tent => {
            if j_max < 5 {
                return Err(SimulateError::ResolutionTooCoarse { j_max, min: 5 });
            }
            let samples: Vec<f64> = (0..n)
                .map(|m| {
                    let x = (m as f64 + 0.5) * h;
                    let v = 1.0 - 30.0 * libm::fabs(x - 0.5);
                    v.max(0.0) * sqrt_h
                })
                .collect();
            Ok(dwt(&samples, filter)?)
        }
        SignalSpec::SingleWavelet(label) => {
            if label.level() > j_max {
                return Err(SimulateError::LabelOutOfRange {
                    level: label.level(),
                    j_max,
                });
            }
            let mut c = CoeffVector::zeros(j_max);
            c.set(*label, 1.0)?;
            Ok(c)
        }
        SignalSpec::Smooth(freq) => {
            let w = 2.0 * core::f64::consts::PI * f64::from(*freq);
            let samples: Vec<f64> = (0..n)
                .map(|m| libm::cos(w * ((m as f64 + 0.5) * h)) * sqrt_h)
                .collect();
            Ok(dwt(&samples, filter)?)
        }
        SignalSpec::Custom(samples) => {
            if samples.len() != n {
                return Err(SimulateError::SampleLengthMismatch {
                    len: samples.len(),
                    expected: n,
                });
            }
            let scaled: Vec<f64> = samples.iter().map(|v| v * sqrt_h).collect();
            Ok(dwt(&scaled, filter)?)
        }
    }
}

/// Draw one observation `(g, K_delta)` of the model.
///
/// `k_delta` equals `k.add_noise(delta, seed)`; the data noise comes from the
/// independent companion stream of the same seed. `delta = epsilon = 0`
/// reproduces the clean pair exactly, and equal seeds give bit-identical
/// observations.
pub fn observe(
    f: &CoeffVector,
    k: &GalerkinMatrix,
    delta: f64,
    epsilon: f64,
    seed: u64,
) -> Result<Observation, SimulateError> {
    if f.len() != k.dim() {
        return Err(SimulateError::DimensionMismatch {
            signal: f.len(),
            operator: k.dim(),
        });
    }
    if delta < 0.0 || epsilon < 0.0 {
        return Err(SimulateError::NegativeNoise);
    }
    let k_delta = k.add_noise(delta, seed);
    let mut g_values = k.apply(f.values());
    if epsilon > 0.0 {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(DATA_NOISE_STREAM);
        for v in g_values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += epsilon * z;
        }
    }
    let g = CoeffVector::from_values(f.max_level(), g_values)?;
    Ok(Observation {
        g,
        k_delta,
        delta,
        epsilon,
        seed,
        truth: f.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_diagonal, build_log_potential};

    #[test]
    fn tent_l2_norm_and_mean() {
        let filter = WaveletFilter::daubechies(8).unwrap();
        let tent = synthesize_signal(&SignalSpec::Tent, 10, &filter).unwrap();
        assert!((tent.l2_norm() - libm::sqrt(1.0 / 45.0)).abs() < 1e-3);
        assert!(synthesize_signal(&SignalSpec::Tent, 4, &filter).is_err());
    }

    #[test]
    fn single_wavelet_is_a_unit_vector() {
        let filter = WaveletFilter::daubechies(8).unwrap();
        let label = MultiIndex::new(3, 5).unwrap();
        let f = synthesize_signal(&SignalSpec::SingleWavelet(label), 6, &filter).unwrap();
        assert_eq!(f.get(label).unwrap(), 1.0);
        assert!((f.l2_norm() - 1.0).abs() < 1e-15);
        let bad = MultiIndex::new(7, 0).unwrap();
        assert!(synthesize_signal(&SignalSpec::SingleWavelet(bad), 6, &filter).is_err());
    }

    #[test]
    fn smooth_signal_concentrates_at_its_frequency_level() {
        // Besov growth in s should match the energy-weighted level of the
        // single frequency (independent concentration oracle).
        let filter = WaveletFilter::daubechies(8).unwrap();
        let f = synthesize_signal(&SignalSpec::Smooth(4), 10, &filter).unwrap();
        let mut energy = 0.0;
        let mut weighted = 0.0;
        for (i, &c) in f.values().iter().enumerate() {
            let lvl = crate::wavelet::level_of_flat(i).max(0) as f64;
            energy += c * c;
            weighted += lvl * c * c;
        }
        let mean_level = weighted / energy;
        // the frequency occupies a couple of adjacent levels, so the growth
        // exponent drifts a little with s; half a level of slack
        for s in [0.5f64, 1.0, 2.0] {
            let growth = libm::log2(f.besov_norm(s, 2.0, 1).unwrap() / f.l2_norm()) / s;
            assert!(
                (growth - mean_level).abs() < 0.5,
                "s={s}: growth {growth} vs mean level {mean_level}"
            );
        }
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let filter = WaveletFilter::daubechies(8).unwrap();
        let k = build_log_potential(6, &filter).unwrap();
        let f = synthesize_signal(&SignalSpec::Tent, 6, &filter).unwrap();
        let obs = observe(&f, &k, 0.0, 0.0, 1).unwrap();
        assert_eq!(obs.k_delta.entries(), k.entries());
        let kf = k.apply(f.values());
        assert_eq!(obs.g.values(), kf.as_slice());
    }

    #[test]
    fn observation_is_deterministic_per_seed() {
        let k = build_diagonal(1.0, 5).unwrap();
        let filter = WaveletFilter::daubechies(4).unwrap();
        let f = synthesize_signal(&SignalSpec::Smooth(2), 5, &filter).unwrap();
        let a = observe(&f, &k, 1e-3, 1e-4, 9).unwrap();
        let b = observe(&f, &k, 1e-3, 1e-4, 9).unwrap();
        assert_eq!(a, b);
        let c = observe(&f, &k, 1e-3, 1e-4, 10).unwrap();
        assert_ne!(a.g, c.g);
        // operator sub-stream matches add_noise directly
        assert_eq!(a.k_delta.entries(), k.add_noise(1e-3, 9).entries());
    }

    #[test]
    fn data_noise_variance_matches_epsilon_squared() {
        let k = build_diagonal(1.0, 4).unwrap();
        let filter = WaveletFilter::daubechies(4).unwrap();
        let f = synthesize_signal(&SignalSpec::Smooth(1), 4, &filter).unwrap();
        let kf = k.apply(f.values());
        let eps = 2e-3;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for seed in 0..320u64 {
            let obs = observe(&f, &k, 0.0, eps, seed).unwrap();
            for (g, t) in obs.g.values().iter().zip(&kf) {
                let d = g - t;
                sum += d;
                sumsq += d * d;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sumsq / count as f64 - mean * mean;
        assert!(count >= 10_000);
        assert!(
            (var - eps * eps).abs() < 0.05 * eps * eps,
            "var {var} vs {}",
            eps * eps
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = build_diagonal(1.0, 5).unwrap();
        let f = CoeffVector::zeros(4);
        assert!(matches!(
            observe(&f, &k, 0.0, 0.0, 0),
            Err(SimulateError::DimensionMismatch { .. })
        ));
        let f5 = CoeffVector::zeros(5);
        assert!(matches!(
            observe(&f5, &k, -0.1, 0.0, 0),
            Err(SimulateError::NegativeNoise)
        ));
    }
}
