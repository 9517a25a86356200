//! Detection over a one-parameter family of states, evaluated in parallel
//! with rows returned in parameter order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{self, DetectConfig, Verdict};
use crate::error::{Error, Result};
use crate::posmap::{self, PositiveMapSpec};
use crate::qstate::{self, DensityOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Family {
    /// Werner mixture `q·|Ψ⁻⟩⟨Ψ⁻| + (1 − q)·I/4`.
    Werner,
    /// Isotropic state of local dimension `d` with singlet fraction `f`.
    Isotropic { d: usize },
}

impl Family {
    pub fn state(&self, param: f64) -> Result<DensityOperator> {
        match *self {
            Family::Werner => qstate::make_werner(param),
            Family::Isotropic { d } => qstate::make_isotropic(param, d),
        }
    }

    pub fn local_dim(&self) -> usize {
        match *self {
            Family::Werner => 2,
            Family::Isotropic { d } => d,
        }
    }
}

/// `points` evenly spaced values from `start` to `end` inclusive.
pub fn grid(start: f64, end: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !start.is_finite() || !end.is_finite() {
        return Err(Error::Invalid("sweep needs a finite range and at least one point".into()));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let step = (end - start) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i == points - 1 { end } else { start + step * i as f64 })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub verdict: Verdict,
    pub lambda_min: f64,
    pub std_error: f64,
    pub threshold: f64,
    pub rescale: f64,
    pub lambda_prime: Option<f64>,
    pub eof_lower: Option<f64>,
    pub eof_upper: Option<f64>,
}

/// Seed used for the point at `index`; keeps sampled rows independent of
/// scheduling.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

pub fn sweep(family: Family, params: &[f64], test: &PositiveMapSpec, config: &DetectConfig) -> Result<Vec<SweepRow>> {
    if test.d() != family.local_dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("test on d = {}", family.local_dim()),
            found: format!("d = {}", test.d()),
        });
    }
    let spa = posmap::build_spa_with_cap(test, config.dense_cap)?;
    params
        .par_iter()
        .enumerate()
        .map(|(i, &param)| {
            let rho = family.state(param)?;
            let cfg = DetectConfig {
                seed: point_seed(config.seed, i),
                ..config.clone()
            };
            let report = detector::detect_with_spa(&rho, &spa, &cfg)?;
            let eof = report.eof_bounds();
            Ok(SweepRow {
                param,
                verdict: report.verdict,
                lambda_min: report.lambda_min_estimate,
                std_error: report.lambda_min_std_error,
                threshold: report.threshold,
                rescale: report.rescale_factor,
                lambda_prime: eof.map(|b| b.lambda_prime),
                eof_lower: eof.map(|b| b.lower),
                eof_upper: eof.map(|b| b.upper),
            })
        })
        .collect()
}
