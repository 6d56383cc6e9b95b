//! Observation bundle on disk: one directory holding the operator matrix, the
//! data coefficients, optional ground truth and a JSON metadata record.
//!
//! Layout:
//! * `operator.gmat` — flat binary: 8-byte magic `GMAT0001`, `i32` max level,
//!   `f64` ill-posedness t, `u8` kernel tag (0 log-potential / 1 diagonal /
//!   2 custom), `f64` kernel parameter, `u64` n, then `n*n` little-endian
//!   `f64` entries in row-major order.
//! * `data.csv`, `truth.csv` — coefficient CSVs `index,level,position,value`.
//! * `meta.json` — noise levels, seed, grid resolution, labels.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use invwave_core::operators::{GalerkinMatrix, KernelKind};
use invwave_core::simulate::Observation;
use invwave_core::wavelet::{level_of_flat, CoeffVector, MultiIndex};

const MAGIC: &[u8; 8] = b"GMAT0001";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad operator file: {0}")]
    BadOperator(String),
    #[error("bad coefficient file: {0}")]
    BadCoefficients(String),
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

/// Metadata stored next to the binary/CSV payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub j_max: i32,
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub wavelet_order: u32,
    pub kernel: String,
    pub signal: String,
}

/// Write a Galerkin matrix as the flat binary format.
pub fn write_operator(path: &Path, k: &GalerkinMatrix) -> Result<(), BundleError> {
    let mut buf = Vec::with_capacity(8 + 4 + 8 + 1 + 8 + 8 + k.dim() * k.dim() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&k.max_level().to_le_bytes());
    buf.extend_from_slice(&k.illposedness().to_le_bytes());
    let (tag, param) = match k.kind() {
        KernelKind::LogPotential => (0u8, 0.0),
        KernelKind::Diagonal { t } => (1u8, t),
        KernelKind::Custom => (2u8, 0.0),
    };
    buf.push(tag);
    buf.extend_from_slice(&param.to_le_bytes());
    buf.extend_from_slice(&(k.dim() as u64).to_le_bytes());
    for v in k.to_row_major() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Read a Galerkin matrix back from the flat binary format.
pub fn read_operator(path: &Path) -> Result<GalerkinMatrix, BundleError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let take = |off: &mut usize, n: usize| -> Result<&[u8], BundleError> {
        if *off + n > bytes.len() {
            return Err(BundleError::BadOperator("truncated file".into()));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };
    let mut off = 0usize;
    if take(&mut off, 8)? != MAGIC {
        return Err(BundleError::BadOperator("missing GMAT0001 magic".into()));
    }
    let max_level = i32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    let t = f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
    let tag = take(&mut off, 1)?[0];
    let param = f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
    let kind = match tag {
        0 => KernelKind::LogPotential,
        1 => KernelKind::Diagonal { t: param },
        2 => KernelKind::Custom,
        other => return Err(BundleError::BadOperator(format!("unknown kernel tag {other}"))),
    };
    let n = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
    let body = take(&mut off, n * n * 8)?;
    let entries: Vec<f64> = body
        .chunks_exact(8)
        .map(|chunk| f64::from_le_bytes(chunk.try_into().unwrap()))
        .collect();
    GalerkinMatrix::from_row_major(max_level, t, kind, entries)
        .map_err(|e| BundleError::BadOperator(e.to_string()))
}

/// Write coefficients as `index,level,position,value` rows.
pub fn write_coeffs(path: &Path, coeffs: &CoeffVector) -> Result<(), BundleError> {
    let mut out = String::from("index,level,position,value\n");
    for (i, v) in coeffs.values().iter().enumerate() {
        let idx = MultiIndex::from_flat(i);
        out.push_str(&format!("{i},{},{},{v:e}\n", idx.level(), idx.position()));
    }
    fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a coefficient CSV written by [`write_coeffs`].
pub fn read_coeffs(path: &Path) -> Result<CoeffVector, BundleError> {
    let body = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(BundleError::BadCoefficients(format!(
                "line {}: expected 4 fields",
                lineno + 1
            )));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| BundleError::BadCoefficients(format!("line {}: bad index", lineno + 1)))?;
        if index != values.len() {
            return Err(BundleError::BadCoefficients(format!(
                "line {}: indices must be consecutive",
                lineno + 1
            )));
        }
        let value: f64 = fields[3].parse().map_err(|_| {
            BundleError::BadCoefficients(format!("line {}: bad value", lineno + 1))
        })?;
        values.push(value);
    }
    if !values.len().is_power_of_two() || values.len() < 2 {
        return Err(BundleError::BadCoefficients(format!(
            "{} rows do not form a dyadic coefficient vector",
            values.len()
        )));
    }
    let max_level = values.len().trailing_zeros() as i32 - 1;
    CoeffVector::from_values(max_level, values)
        .map_err(|e| BundleError::BadCoefficients(e.to_string()))
}

/// Write a full observation bundle into `dir` (created if needed).
pub fn write_observation(
    dir: &Path,
    obs: &Observation,
    kernel_label: &str,
    signal_label: &str,
    wavelet_order: u32,
) -> Result<(), BundleError> {
    fs::create_dir_all(dir)?;
    write_operator(&dir.join("operator.gmat"), &obs.k_delta)?;
    write_coeffs(&dir.join("data.csv"), &obs.g)?;
    write_coeffs(&dir.join("truth.csv"), &obs.truth)?;
    let meta = BundleMeta {
        j_max: obs.g.max_level(),
        delta: obs.delta,
        epsilon: obs.epsilon,
        seed: obs.seed,
        wavelet_order,
        kernel: kernel_label.to_string(),
        signal: signal_label.to_string(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// An observation read back from disk; truth is optional.
#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub observation: Observation,
    pub truth_available: bool,
    pub meta: BundleMeta,
}

/// Read a bundle directory. A missing `truth.csv` yields a zero truth vector
/// with `truth_available = false`.
pub fn read_observation(dir: &Path) -> Result<LoadedBundle, BundleError> {
    let meta: BundleMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    let k_delta = read_operator(&dir.join("operator.gmat"))?;
    let g = read_coeffs(&dir.join("data.csv"))?;
    if g.len() != k_delta.dim() {
        return Err(BundleError::Inconsistent(format!(
            "data has {} coefficients but the operator is {}-dimensional",
            g.len(),
            k_delta.dim()
        )));
    }
    let truth_path = dir.join("truth.csv");
    let (truth, truth_available) = if truth_path.exists() {
        let t = read_coeffs(&truth_path)?;
        if t.len() != g.len() {
            return Err(BundleError::Inconsistent(
                "truth and data resolutions differ".into(),
            ));
        }
        (t, true)
    } else {
        (CoeffVector::zeros(g.max_level()), false)
    };
    Ok(LoadedBundle {
        observation: Observation {
            g,
            k_delta,
            delta: meta.delta,
            epsilon: meta.epsilon,
            seed: meta.seed,
            truth,
        },
        truth_available,
        meta,
    })
}

/// Sanity check used in tests: levels recorded in a coefficient CSV match the
/// flat indexing.
pub fn coeff_csv_is_level_major(path: &Path) -> Result<bool, BundleError> {
    let body = fs::read_to_string(path)?;
    for (lineno, line) in body.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let index: usize = fields[0].parse().unwrap_or(usize::MAX);
        let level: i32 = fields[1].parse().unwrap_or(i32::MIN);
        if level_of_flat(index) != level {
            let _ = lineno;
            return Ok(false);
        }
    }
    Ok(true)
}
