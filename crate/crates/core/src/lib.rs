//! Wavelet-Galerkin machinery for statistical linear inverse problems with a
//! noisy operator.
//!
//! The observation model is the pair
//!
//! ```text
//! g = K f + eps * W,        K_delta = K + delta * B,
//! ```
//!
//! where `K` is an integral operator on the circle `[0, 1)`, `W` is Gaussian
//! white noise on the data and `B` is Gaussian operator white noise: in an
//! orthonormal wavelet basis the vector `<W, psi>` and the matrix
//! `<B psi, psi'>` have i.i.d. standard normal entries. Everything here works
//! in wavelet coordinates:
//!
//! * [`wavelet`] — periodized orthogonal wavelets on `[0, 1)` (Mallat pyramid,
//!   level-major indexing, Besov/Sobolev norming through weighted coefficients);
//! * [`operators`] — Galerkin (stiffness) matrices of integral operators,
//!   operator noise injection and spectral quantities;
//! * [`simulate`] — ground-truth signals and reproducible noisy observations;
//! * [`estimators`] — the linear Galerkin estimator, two nonlinear
//!   thresholding estimators, the data-driven level rule and rate exponents.
//!
//! The crate is `no_std` (with `alloc`); all operations are pure functions of
//! their inputs and safe to run concurrently. Transcendental math goes through
//! `libm` so results are bit-reproducible across platforms.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is the NaN-rejecting form of parameter validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod estimators;
mod linalg;
pub mod operators;
pub mod simulate;
pub mod wavelet;

pub use estimators::{
    Diagnostics, Estimate, EstimatorError, LinearSpec, Nl1Spec, Nl2Spec, Regime, RuleVariant,
    SparseRate, ThresholdMode,
};
pub use operators::{GalerkinMatrix, KernelKind, OperatorError, OperatorNorms};
pub use simulate::{observe, Observation, SignalSpec, SimulateError};
pub use wavelet::{CoeffVector, MultiIndex, WaveletError, WaveletFamily, WaveletFilter};
