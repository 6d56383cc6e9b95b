//! Galerkin (stiffness) matrices of integral operators in the wavelet basis.
//!
//! The entry at row `lambda'`, column `lambda` stores `<T psi_lambda,
//! psi_lambda'>` in level-major flat order, so the matrix acts on coefficient
//! vectors by plain multiplication and the `V_j` Galerkin projection is the
//! leading principal block of size `2^(j+1)`.
//!
//! Assembly goes through the fine-grid scaling basis: midpoint quadrature
//! `h * k(x_m, x_n)` on the `2^(J+1)` grid, then a 2-D wavelet transform
//! (rows, then columns). For the logarithmic potential the diagonal cells use
//! the analytic singular integral instead of the midpoint value.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg;
use crate::wavelet::{dim_v, dwt_into, level_of_flat, WaveletError, WaveletFilter};

/// ChaCha stream id for operator noise; [`crate::simulate::observe`] uses the
/// companion data stream so the two noises are independent under one seed.
pub(crate) const OPERATOR_NOISE_STREAM: u64 = 1;

/// Kernel family of an assembled matrix (metadata only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `k(x, y) = -log(1/2 |sin(pi (x - y))|)` on the circle; degree of
    /// ill-posedness `t = 1`.
    LogPotential,
    /// Diagonal fixture `K = diag(2^{-(|lambda|+1) t})`.
    Diagonal { t: f64 },
    /// Assembled from a user-supplied kernel function.
    Custom,
}

/// Errors from operator construction and spectral computations.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorError {
    /// `J_max` too small for the requested assembly (filter support).
    JmaxTooSmall { j_max: i32, min: i32 },
    /// Parameter outside its domain.
    InvalidParameter { what: &'static str },
    /// Requested level outside `-1..=max_level`.
    LevelOutOfRange { level: i32, max_level: i32 },
    /// Matrix numerically singular where an inverse was required.
    Singular,
    Wavelet(WaveletError),
}

impl fmt::Display for OperatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorError::JmaxTooSmall { j_max, min } => {
                write!(f, "J_max = {j_max} too small (need at least {min})")
            }
            OperatorError::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            OperatorError::LevelOutOfRange { level, max_level } => {
                write!(f, "level {level} outside -1..={max_level}")
            }
            OperatorError::Singular => write!(f, "matrix is numerically singular"),
            OperatorError::Wavelet(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OperatorError {}

impl From<WaveletError> for OperatorError {
    fn from(e: WaveletError) -> Self {
        OperatorError::Wavelet(e)
    }
}

/// Spectral quantities of a Galerkin matrix used by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorNorms {
    /// Largest singular value (`V_j -> V_j` operator norm).
    pub spec: f64,
    /// Smallest singular value.
    pub min_sv: f64,
    /// Smallest eigenvalue of the symmetrized part `(K + K^T)/2`.
    pub min_eig: f64,
    /// `1 / min_sv`, the `L^2 -> L^2` norm of the inverse.
    pub inv_norm: f64,
    /// `H^t -> L^2` norm of the inverse, realized as the spectral norm of
    /// `K^{-1} D_{-t}` with `D_{-t} = diag(2^{-max(|lambda|,0) t})`.
    pub inv_ht_norm: f64,
}

/// Operator represented by its wavelet-basis stiffness entries on `V_{J}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinMatrix {
    max_level: i32,
    illposedness: f64,
    kind: KernelKind,
    entries: DMatrix<f64>,
}

impl GalerkinMatrix {
    /// Wrap raw entries. The matrix must be square with side `2^(max_level+1)`.
    pub fn from_entries(
        max_level: i32,
        illposedness: f64,
        kind: KernelKind,
        entries: DMatrix<f64>,
    ) -> Result<Self, OperatorError> {
        if max_level < -1 || entries.nrows() != entries.ncols() || entries.nrows() != dim_v(max_level)
        {
            return Err(OperatorError::InvalidParameter {
                what: "entries must be square of size 2^(max_level+1)",
            });
        }
        Ok(Self {
            max_level,
            illposedness,
            kind,
            entries,
        })
    }

    /// Wrap row-major raw entries (side `2^(max_level+1)`).
    pub fn from_row_major(
        max_level: i32,
        illposedness: f64,
        kind: KernelKind,
        entries: Vec<f64>,
    ) -> Result<Self, OperatorError> {
        if max_level < -1 || entries.len() != dim_v(max_level) * dim_v(max_level) {
            return Err(OperatorError::InvalidParameter {
                what: "entries must be square of size 2^(max_level+1)",
            });
        }
        let n = dim_v(max_level);
        Self::from_entries(
            max_level,
            illposedness,
            kind,
            DMatrix::from_row_slice(n, n, &entries),
        )
    }

    /// Entries flattened row-major.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                out.push(self.entries[(r, c)]);
            }
        }
        out
    }

    /// Entry at `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn max_level(&self) -> i32 {
        self.max_level
    }

    /// Declared degree of ill-posedness `t` (metadata).
    pub fn illposedness(&self) -> f64 {
        self.illposedness
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Apply to a coefficient slice (`K u`).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.dim());
        let v = nalgebra::DVector::from_column_slice(u);
        (&self.entries * v).iter().copied().collect()
    }

    /// Galerkin projection onto `V_j`: the leading principal block.
    pub fn submatrix(&self, j: i32) -> Result<GalerkinMatrix, OperatorError> {
        if j < -1 || j > self.max_level {
            return Err(OperatorError::LevelOutOfRange {
                level: j,
                max_level: self.max_level,
            });
        }
        let n = dim_v(j);
        let block = self.entries.view((0, 0), (n, n)).into_owned();
        Ok(GalerkinMatrix {
            max_level: j,
            illposedness: self.illposedness,
            kind: self.kind,
            entries: block,
        })
    }

    /// `K + delta * Xi` with `Xi` i.i.d. standard normal (raw, not
    /// symmetrized), filled in row-major order from a ChaCha stream, so equal
    /// seeds give bit-identical matrices.
    pub fn add_noise(&self, delta: f64, seed: u64) -> GalerkinMatrix {
        debug_assert!(delta >= 0.0);
        let n = self.dim();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(OPERATOR_NOISE_STREAM);
        let mut noisy = self.entries.clone();
        if delta > 0.0 {
            for r in 0..n {
                for c in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    noisy[(r, c)] += delta * z;
                }
            }
        }
        GalerkinMatrix {
            max_level: self.max_level,
            illposedness: self.illposedness,
            kind: self.kind,
            entries: noisy,
        }
    }

    /// Spectral quantities. Fails with [`OperatorError::Singular`] when the
    /// matrix cannot be inverted numerically (callers treat that as a cutoff).
    pub fn operator_norms(&self, t: f64) -> Result<OperatorNorms, OperatorError> {
        let (spec, min_sv) = linalg::svd_extremes(&self.entries);
        if !(min_sv > linalg::SINGULARITY_RATIO * spec) {
            return Err(OperatorError::Singular);
        }
        let min_eig = linalg::sym_min_eig(&self.entries);
        let diag: Vec<f64> = (0..self.dim())
            .map(|i| libm::exp2(-(level_of_flat(i).max(0) as f64) * t))
            .collect();
        let x = linalg::lu_solve_diag_rhs(&self.entries, &diag).ok_or(OperatorError::Singular)?;
        let inv_ht_norm = linalg::spectral_norm(&x);
        Ok(OperatorNorms {
            spec,
            min_sv,
            min_eig,
            inv_norm: 1.0 / min_sv,
            inv_ht_norm,
        })
    }

    /// Smallest eigenvalue of the symmetrized part (used by the level rule).
    pub fn min_eig_symmetrized(&self) -> f64 {
        linalg::sym_min_eig(&self.entries)
    }

    /// Eigenvalues of the symmetrized part, descending.
    pub fn eigenvalues_symmetrized(&self) -> Vec<f64> {
        linalg::sym_eigenvalues_desc(&self.entries)
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values_desc(&self.entries)
    }

    /// Finite-level truncation of the mapping constant
    /// `max_{0 <= j <= max_level} 2^{-jt} ||K_j^{-1}||`.
    pub fn mapping_constant(&self, t: f64) -> Result<f64, OperatorError> {
        if self.max_level < 0 {
            return Err(OperatorError::InvalidParameter {
                what: "mapping constant needs max_level >= 0",
            });
        }
        let mut best = f64::NEG_INFINITY;
        for j in 0..=self.max_level {
            let block = self.submatrix(j)?;
            let (spec, min_sv) = linalg::svd_extremes(block.entries());
            if !(min_sv > linalg::SINGULARITY_RATIO * spec) {
                return Err(OperatorError::Singular);
            }
            let v = libm::exp2(-(j as f64) * t) / min_sv;
            best = best.max(v);
        }
        Ok(best)
    }
}

/// Stiffness matrix of the single-layer logarithmic potential
/// `k(x, y) = -log(1/2 |sin(pi (x - y))|)` on `V_{J_max}`.
///
/// Off-diagonal cells use the midpoint rule `h * k(x_m, x_n)`; diagonal cells
/// use the analytic cell integral `h (3/2 - log(pi h / 2))` of the local
/// approximation `-log(pi |x - y| / 2)` (relative error `O(h^2)`). The result
/// is symmetric to quadrature accuracy and has degree of ill-posedness 1.
pub fn build_log_potential(
    j_max: i32,
    filter: &WaveletFilter,
) -> Result<GalerkinMatrix, OperatorError> {
    if j_max < 3 {
        return Err(OperatorError::JmaxTooSmall { j_max, min: 3 });
    }
    let n = dim_v(j_max);
    if n < filter.len() {
        return Err(OperatorError::JmaxTooSmall {
            j_max,
            min: (filter.len().trailing_zeros() as i32) - 1,
        });
    }
    let h = 1.0 / n as f64;
    // circulant first row: c[d] = h * k(d * h), with the corrected diagonal
    let mut row0 = vec![0.0; n];
    row0[0] = h * (1.5 - libm::log(core::f64::consts::PI * h / 2.0));
    for (d, v) in row0.iter_mut().enumerate().skip(1) {
        let u = d as f64 * h;
        *v = h * -libm::log(0.5 * libm::fabs(libm::sin(core::f64::consts::PI * u)));
    }
    let mut flat = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            flat[r * n + c] = row0[(c + n - r) % n];
        }
    }
    let entries = wavelet_transform_2d(flat, n, filter)?;
    Ok(GalerkinMatrix {
        max_level: j_max,
        illposedness: 1.0,
        kind: KernelKind::LogPotential,
        entries,
    })
}

/// Stiffness matrix of a user kernel by plain midpoint quadrature (no
/// diagonal correction; intended for bounded kernels).
pub fn build_custom<F: Fn(f64, f64) -> f64>(
    kernel: F,
    j_max: i32,
    filter: &WaveletFilter,
    illposedness: f64,
) -> Result<GalerkinMatrix, OperatorError> {
    if j_max < 3 {
        return Err(OperatorError::JmaxTooSmall { j_max, min: 3 });
    }
    let n = dim_v(j_max);
    if n < filter.len() {
        return Err(OperatorError::JmaxTooSmall {
            j_max,
            min: (filter.len().trailing_zeros() as i32) - 1,
        });
    }
    let h = 1.0 / n as f64;
    let mut flat = vec![0.0; n * n];
    for r in 0..n {
        let x = (r as f64 + 0.5) * h;
        for c in 0..n {
            let y = (c as f64 + 0.5) * h;
            flat[r * n + c] = h * kernel(x, y);
        }
    }
    let entries = wavelet_transform_2d(flat, n, filter)?;
    Ok(GalerkinMatrix {
        max_level: j_max,
        illposedness,
        kind: KernelKind::Custom,
        entries,
    })
}

/// Diagonal fixture `K = diag(2^{-(|lambda|+1) t})` with exactly known
/// spectral behavior (degree of ill-posedness `t`).
pub fn build_diagonal(t: f64, j_max: i32) -> Result<GalerkinMatrix, OperatorError> {
    if !(t > 0.0) {
        return Err(OperatorError::InvalidParameter { what: "t must be > 0" });
    }
    if j_max < -1 {
        return Err(OperatorError::InvalidParameter { what: "j_max must be >= -1" });
    }
    let n = dim_v(j_max);
    let entries = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            libm::exp2(-((level_of_flat(r) + 1) as f64) * t)
        } else {
            0.0
        }
    });
    Ok(GalerkinMatrix {
        max_level: j_max,
        illposedness: t,
        kind: KernelKind::Diagonal { t },
        entries,
    })
}

/// 2-D orthogonal wavelet transform of a row-major scaling-basis matrix:
/// transform every row, then every column (`W M W^T`).
fn wavelet_transform_2d(
    mut flat: Vec<f64>,
    n: usize,
    filter: &WaveletFilter,
) -> Result<DMatrix<f64>, OperatorError> {
    let mut line = vec![0.0; n];
    let mut out_line = vec![0.0; n];
    for r in 0..n {
        line.copy_from_slice(&flat[r * n..(r + 1) * n]);
        dwt_into(&line, filter, &mut out_line)?;
        flat[r * n..(r + 1) * n].copy_from_slice(&out_line);
    }
    for c in 0..n {
        for r in 0..n {
            line[r] = flat[r * n + c];
        }
        dwt_into(&line, filter, &mut out_line)?;
        for r in 0..n {
            flat[r * n + c] = out_line[r];
        }
    }
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::MultiIndex;

    #[test]
    fn diagonal_fixture_entries() {
        let k = build_diagonal(1.0, 5).unwrap();
        // |lambda| = -1 -> 2^0 = 1
        assert_eq!(k.entries()[(0, 0)], 1.0);
        // |lambda| = 3 -> 2^-4
        let i = MultiIndex::new(3, 0).unwrap().flat();
        assert_eq!(k.entries()[(i, i)], 0.0625);
        assert!(build_diagonal(0.0, 5).is_err());
        assert!(build_diagonal(-1.0, 5).is_err());
    }

    #[test]
    fn diagonal_mapping_constant_is_two_to_t() {
        for t in [0.5, 1.0, 2.0] {
            let k = build_diagonal(t, 8).unwrap();
            let mc = k.mapping_constant(t).unwrap();
            assert!(
                (mc - libm::exp2(t)).abs() < 1e-10,
                "t={t}: {mc} vs {}",
                libm::exp2(t)
            );
        }
    }

    #[test]
    fn diagonal_inv_ht_norm_is_two_to_t() {
        let t = 1.0;
        let k = build_diagonal(t, 6).unwrap();
        let norms = k.operator_norms(t).unwrap();
        assert!((norms.inv_ht_norm - 2.0).abs() < 1e-10, "{}", norms.inv_ht_norm);
    }

    #[test]
    fn identity_norms_are_one() {
        let n = dim_v(4);
        let k = GalerkinMatrix::from_entries(
            4,
            0.0,
            KernelKind::Custom,
            DMatrix::identity(n, n),
        )
        .unwrap();
        let norms = k.operator_norms(0.0).unwrap();
        assert!((norms.spec - 1.0).abs() < 1e-12);
        assert!((norms.min_sv - 1.0).abs() < 1e-12);
        assert!((norms.min_eig - 1.0).abs() < 1e-12);
        assert!((norms.inv_norm - 1.0).abs() < 1e-12);
        assert!((norms.inv_ht_norm - 1.0).abs() < 1e-12);
        assert!((k.mapping_constant(0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn submatrix_blocks() {
        let k = build_diagonal(1.0, 10).unwrap();
        let b = k.submatrix(2).unwrap();
        assert_eq!(b.dim(), 8);
        let min = (0..8).map(|i| b.entries()[(i, i)]).fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.125); // 2^-3 at level 2
        assert_eq!(k.submatrix(10).unwrap().dim(), k.dim());
        assert_eq!(k.submatrix(-1).unwrap().dim(), 1);
        assert!(k.submatrix(11).is_err());
        assert!(k.submatrix(-2).is_err());
    }

    #[test]
    fn log_potential_is_symmetric_and_t_one() {
        let filter = WaveletFilter::daubechies(8).unwrap();
        let k = build_log_potential(6, &filter).unwrap();
        assert_eq!(k.illposedness(), 1.0);
        let e = k.entries();
        let mut worst = 0.0f64;
        for r in 0..k.dim() {
            for c in 0..k.dim() {
                worst = worst.max((e[(r, c)] - e[(c, r)]).abs());
            }
        }
        assert!(worst < 1e-8, "asymmetry {worst}");
        assert!(build_log_potential(2, &filter).is_err());
    }

    #[test]
    fn log_potential_top_eigenvalue_small_grid() {
        // top eigenvalue approaches 2 log 2 already at moderate J_max
        let filter = WaveletFilter::daubechies(8).unwrap();
        let k = build_log_potential(8, &filter).unwrap();
        let ev = k.eigenvalues_symmetrized();
        let target = 2.0 * libm::log(2.0);
        assert!(
            (ev[0] - target).abs() / target < 0.01,
            "top {} vs {target}",
            ev[0]
        );
        // next pair is 1/2 within 1%
        assert!((ev[1] - 0.5).abs() < 0.005, "{}", ev[1]);
        assert!((ev[2] - 0.5).abs() < 0.005, "{}", ev[2]);
    }

    #[test]
    fn custom_kernel_rank_one() {
        // k(x, y) = 1 maps f to its mean: the only nonzero wavelet entry is
        // the scaling-scaling one, and it equals 1
        let filter = WaveletFilter::daubechies(8).unwrap();
        let k = build_custom(|_, _| 1.0, 5, &filter, 0.0).unwrap();
        assert!((k.entries()[(0, 0)] - 1.0).abs() < 1e-10);
        let mut off = 0.0f64;
        for r in 0..k.dim() {
            for c in 0..k.dim() {
                if (r, c) != (0, 0) {
                    off = off.max(k.entries()[(r, c)].abs());
                }
            }
        }
        assert!(off < 1e-10, "off-entry {off}");
        assert_eq!(k.kind(), KernelKind::Custom);
    }

    #[test]
    fn noise_is_deterministic_and_unbiased() {
        let k = build_diagonal(1.0, 4).unwrap();
        let a = k.add_noise(1e-3, 77);
        let b = k.add_noise(1e-3, 77);
        assert_eq!(a.entries(), b.entries()); // bit-identical by contract
        let c = k.add_noise(0.0, 78);
        assert_eq!(c.entries(), k.entries());

        // mean over 200 seeds of a fixed entry within 3 delta / sqrt(200)
        let delta = 1e-2;
        let (r, c) = (3, 5);
        let mut mean = 0.0;
        for seed in 0..200 {
            mean += k.add_noise(delta, seed).entries()[(r, c)];
        }
        mean /= 200.0;
        let truth = k.entries()[(r, c)];
        assert!(
            (mean - truth).abs() < 3.0 * delta / libm::sqrt(200.0),
            "mean {mean} vs {truth}"
        );
    }

    #[test]
    fn noise_entry_variance_matches_delta_squared() {
        let k = build_diagonal(1.0, 3).unwrap();
        let delta = 5e-3;
        let n = k.dim();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for seed in 0..64u64 {
            let noisy = k.add_noise(delta, seed);
            for r in 0..n {
                for c in 0..n {
                    let d = noisy.entries()[(r, c)] - k.entries()[(r, c)];
                    sum += d;
                    sumsq += d * d;
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        let var = sumsq / count as f64 - mean * mean;
        assert!(count >= 10_000);
        assert!(
            (var - delta * delta).abs() < 0.05 * delta * delta,
            "var {var} vs {}",
            delta * delta
        );
    }

    #[test]
    fn interlacing_min_eig_non_increasing() {
        let filter = WaveletFilter::daubechies(8).unwrap();
        let k = build_log_potential(6, &filter).unwrap();
        let mut prev = f64::INFINITY;
        for j in 0..=6 {
            let cur = k.submatrix(j).unwrap().min_eig_symmetrized();
            assert!(cur <= prev + 1e-12, "j={j}: {cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn singular_matrix_reports_singular() {
        let n = dim_v(2);
        let mut m = DMatrix::identity(n, n);
        m[(n - 1, n - 1)] = 0.0;
        let k = GalerkinMatrix::from_entries(2, 0.0, KernelKind::Custom, m).unwrap();
        assert!(matches!(k.operator_norms(0.0), Err(OperatorError::Singular)));
        assert!(matches!(k.mapping_constant(0.0), Err(OperatorError::Singular)));
    }
}
